"""Answering active queries from random examples.

One attempt draws unlabeled points, forwards each with probability chi(x)
to the labeller, stops after t forwarded points and averages phi over them.
The answer is the median of k independent attempts.

When phi takes two values, namely offset +/- scale * l * s(x) with s a fixed
halfspace sign (or constant), and the source has no noise or uniform noise,
an attempt only depends on two counts. The number of unlabeled draws is
t plus a negative binomial, and the number of "high" values is binomial with a
probability the exact backend supplies.  Simulating these counts has the same
distribution as the per-example loop and costs O(1), which is what makes
trial batches with millions of labels tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import constants
from ..core import (
    ActiveQuery,
    InsufficientAcceptance,
    NoiseKind,
    TargetIndependentQuery,
    UsageKind,
)
from ..distributions import LabeledSource
from ..queries import Band
from ..distributions import band_probability
from .base import StatOracle
from .expectations import NotStructured, TwoValuedForm, expectation_model, two_valued_form


@dataclass
class _Counts:
    """Law of one attempt in count form."""

    mass: float        # E_D[chi]
    p_high: float      # Pr[l * s(x) = +1] for a forwarded point under the source's noise


class Sampler:
    """Shared attempt machinery bound to one source."""

    def __init__(self, source: LabeledSource, fast: bool = True, share_samples: bool = False):
        self.source = source
        self.fast = fast
        self.share_samples = share_samples
        self.model = expectation_model(source) if fast else None
        self._shared: dict = {}

    @property
    def rng(self) -> np.random.Generator:
        return self.source.rng

    # -- count-level path ------------------------------------------------

    def counts(self, filt, form: TwoValuedForm | None) -> _Counts | None:
        if self.model is None or form is None:
            return None
        noise = self.source.noise
        if noise.kind is NoiseKind.PER_POINT:
            return None
        try:
            corr, mass = self.model.label_sign_correlation(filt, form.direction)
        except NotStructured:
            return None
        if mass <= 0:
            return _Counts(0.0, 0.5)
        clean = max(-1.0, min(1.0, corr / mass))
        noisy = (1.0 - 2.0 * noise.eta) * clean
        return _Counts(mass, 0.5 * (1.0 + noisy))

    def _forwarded(self, mass: float, t: int, cap: int, k: int, labeled: bool) -> np.ndarray:
        """Unlabeled draws per attempt; raises if any attempt exceeds the cap."""
        tally = self.source.tally
        if mass >= 1.0:
            draws = np.full(k, t, dtype=np.int64)
        elif mass <= 0.0:
            draws = np.full(k, np.iinfo(np.int64).max, dtype=np.int64)
        else:
            draws = t + self.rng.negative_binomial(t, mass, size=k)
        over = np.flatnonzero(draws > cap)
        if over.size:
            first = int(over[0])
            # attempts before the failing one completed normally
            tally.add(UsageKind.UNLABELED, int(draws[:first].sum()) + cap)
            partial = t - 1 if mass >= 1.0 else self._accepted_within(cap, mass, t)
            if labeled:
                tally.add(UsageKind.LABELS, t * first + partial)
            raise InsufficientAcceptance(
                f"attempt collected {partial} of {t} filtered points within {cap} draws"
            )
        tally.add(UsageKind.UNLABELED, int(draws.sum()))
        if labeled:
            tally.add(UsageKind.LABELS, t * k)
        return draws

    def _accepted_within(self, cap: int, mass: float, t: int) -> int:
        # Bin(cap, mass) conditioned on being below t
        for _ in range(100):
            got = int(self.rng.binomial(cap, mass))
            if got < t:
                return got
        return t - 1

    def count_attempts(self, counts: _Counts, form: TwoValuedForm, t: int, cap: int, k: int) -> np.ndarray:
        self._forwarded(counts.mass, t, cap, k, labeled=True)
        highs = self.rng.binomial(t, counts.p_high, size=k)
        return form.offset + form.scale * (2.0 * highs / t - 1.0)

    def constant_attempts(self, mass: float, value: float, t: int, cap: int, k: int) -> np.ndarray:
        """Attempts for a label-free query that is constant on the filter's support."""
        self._forwarded(mass, t, cap, k, labeled=False)
        return np.full(k, value)

    # -- per-example path ------------------------------------------------

    def _collect(self, filt_values, t: int, cap: int, rate_hint: float) -> tuple[np.ndarray, int]:
        """Forward points until t are accepted; returns (accepted points, draws used)."""
        marginal = self.source.marginal
        chunks: list[np.ndarray] = []
        got = used = 0
        rate = max(rate_hint, 1e-3)
        while got < t:
            room = cap - used
            if room <= 0:
                pts = np.concatenate(chunks) if chunks else np.empty((0, marginal.d))
                return pts, used
            n = int(min(room, max(256, math.ceil(1.2 * (t - got) / rate) + 64)))
            x = marginal.sample(self.rng, n)
            u = self.rng.random(n)
            idx = np.flatnonzero(u < filt_values(x))
            need = t - got
            if idx.size >= need:
                used += int(idx[need - 1]) + 1
                chunks.append(x[idx[:need]])
                got = t
            else:
                used += n
                chunks.append(x[idx])
                got += idx.size
                rate = max(got / used, 1e-4) if got else rate / 4
        return np.concatenate(chunks), used

    def example_attempts(self, query: ActiveQuery, value_fn, t: int, cap: int, k: int, labeled: bool) -> np.ndarray:
        """value_fn(points, labels) -> values, or value_fn(points, None) for label-free parts."""
        src = self.source
        key = (query.filter, labeled)
        if self.share_samples:
            try:
                stored = self._shared.setdefault(key, {})
            except TypeError:
                stored = None
        else:
            stored = None
        out = np.empty(k)
        for i in range(k):
            cached = stored.get(i) if stored is not None else None
            if cached is not None and cached[0].shape[0] >= t:
                pts, labels = cached[0][:t], (None if cached[1] is None else cached[1][:t])
            else:
                pts, used = self._collect(query.filter_values, t, cap, query.filter_tolerance)
                src.tally.add(UsageKind.UNLABELED, used)
                labels = src.request_labels(pts) if labeled else None
                if pts.shape[0] < t:
                    raise InsufficientAcceptance(
                        f"attempt collected {pts.shape[0]} of {t} filtered points within {cap} draws"
                    )
                if stored is not None:
                    stored[i] = (pts, labels)
            out[i] = float(np.mean(value_fn(pts, labels)))
        return out

    # -- target-independent --------------------------------------------------

    def unlabeled_attempts(self, query: TargetIndependentQuery, t: int, k: int) -> np.ndarray:
        src = self.source
        if self.fast and isinstance(query.query, Band) and src.marginal.symmetric:
            p = band_probability(src.marginal, query.query.normal, query.query.width)
            src.tally.add(UsageKind.UNLABELED, t * k)
            return self.rng.binomial(t, p, size=k) / t
        out = np.empty(k)
        for i in range(k):
            out[i] = float(np.mean(query.values(src.sample_unlabeled(t))))
        return out


def median_answer(estimates: np.ndarray) -> float:
    return float(np.median(estimates))


class SamplingOracle(StatOracle):
    """Simulates the oracle from labelled examples; correct w.p. >= 1 - delta per query."""

    name = "sampling"

    def __init__(self, source: LabeledSource, delta: float, fast: bool = True, share_samples: bool = False):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        super().__init__(source.tally)
        self.source = source
        self.delta = delta
        self.sampler = Sampler(source, fast=fast, share_samples=share_samples)

    @property
    def dimension(self) -> int:
        return self.source.d

    def estimate(self, query: ActiveQuery, tau: float, delta: float) -> float:
        """Median-of-attempts estimate of E_{A|chi}[phi] at tolerance ``tau``."""
        t = constants.labels_per_attempt(tau)
        k = constants.attempts_for(delta)
        cap = constants.unlabeled_cap(t, query.filter_tolerance)
        form = two_valued_form(query.query)
        counts = self.sampler.counts(query.filter, form)
        if counts is not None:
            return median_answer(self.sampler.count_attempts(counts, form, t, cap, k))
        return median_answer(
            self.sampler.example_attempts(query, query.query_values, t, cap, k, labeled=True)
        )

    def _answer(self, query: ActiveQuery) -> float:
        return self.estimate(query, query.query_tolerance, self.delta)

    def _answer_unlabeled(self, query: TargetIndependentQuery) -> float:
        t = constants.labels_per_attempt(query.tolerance)
        k = constants.attempts_for(self.delta)
        return median_answer(self.sampler.unlabeled_attempts(query, t, k))
