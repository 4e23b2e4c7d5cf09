"""Answering active queries from noisy labels.

Any query splits into a label-free part and a part that is linear in the label:

    phi(x, l) = (phi(x, 1) + phi(x, -1)) / 2  +  l * (phi(x, 1) - phi(x, -1)) / 2.

The first part does not see the noise. Under uniform flips at rate eta, the
expectation of the second part shrinks by exactly (1 - 2 eta). So it is
estimated more finely and divided by (1 - 2 eta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import constants
from ..core import ActiveQuery, ActiveSQError, TargetIndependentQuery, UsageKind
from ..distributions import LabeledSource
from .base import StatOracle
from .expectations import TwoValuedForm, two_valued_form
from .sampling import SamplingOracle, median_answer


def _parts(query: ActiveQuery):
    def even(points, _labels):
        n = points.shape[0]
        return 0.5 * (query.query_values(points, np.ones(n)) + query.query_values(points, -np.ones(n)))

    def odd(points, labels):
        n = points.shape[0]
        diff = query.query_values(points, np.ones(n)) - query.query_values(points, -np.ones(n))
        return 0.5 * np.asarray(labels, float) * diff

    return even, odd


class RcnOracle(SamplingOracle):
    """Simulates the oracle from labels flipped uniformly at an (approximately) known rate."""

    name = "rcn"

    def __init__(self, source: LabeledSource, eta_assumed: float, delta: float, fast: bool = True,
                 share_samples: bool = False):
        if not 0.0 <= eta_assumed < 0.5:
            raise ValueError("assumed noise rate must lie in [0, 1/2)")
        super().__init__(source, delta, fast=fast, share_samples=share_samples)
        self.eta_assumed = float(eta_assumed)

    # tolerances of the two sub-estimates: (label-free, correlation)
    def split_tolerances(self, tau: float, parity: str | None) -> tuple[float, float]:
        shrink = 1.0 - 2.0 * self.eta_assumed
        if parity == "odd":
            return 0.0, shrink * tau
        if parity == "even":
            return tau, 0.0
        return tau / 2.0, shrink * tau / 2.0

    def _answer(self, query: ActiveQuery) -> float:
        if self.eta_assumed == 0.0:
            return self.estimate(query, query.query_tolerance, self.delta)
        return self.decomposed(query)

    def decomposed(self, query: ActiveQuery) -> float:
        free_tol, corr_tol = self.split_tolerances(query.query_tolerance, query.label_parity)
        parts = (free_tol > 0) + (corr_tol > 0)
        delta = self.delta / parts
        k = constants.attempts_for(delta)
        tau0 = query.filter_tolerance
        form = two_valued_form(query.query)
        even_fn, odd_fn = _parts(query)

        free = 0.0
        if free_tol > 0:
            t = constants.labels_per_attempt(free_tol)
            cap = constants.unlabeled_cap(t, tau0)
            counts = self.sampler.counts(query.filter, form)
            if counts is not None:
                free = median_answer(self.sampler.constant_attempts(counts.mass, form.offset, t, cap, k))
            else:
                free = median_answer(self.sampler.example_attempts(query, even_fn, t, cap, k, labeled=False))

        corr = 0.0
        if corr_tol > 0:
            t = constants.labels_per_attempt(corr_tol)
            cap = constants.unlabeled_cap(t, tau0)
            odd_form = None if form is None else TwoValuedForm(0.0, form.scale, form.direction)
            counts = self.sampler.counts(query.filter, odd_form)
            if counts is not None:
                corr = median_answer(self.sampler.count_attempts(counts, odd_form, t, cap, k))
            else:
                corr = median_answer(self.sampler.example_attempts(query, odd_fn, t, cap, k, labeled=True))
        value = free + corr / (1.0 - 2.0 * self.eta_assumed)
        return min(1.0, max(-1.0, value))


class UncorrelatedOracle(RcnOracle):
    """Per-point flip rates whose deviation from eta is nearly orthogonal to the query.

    Only the tolerance split differs from the uniform-noise case. The
    correlation part is estimated at (1 - 2 eta) tau / 4, which leaves the other
    quarter of the budget for the bias introduced by Lambda.
    """

    name = "uncorrelated"

    def split_tolerances(self, tau: float, parity: str | None) -> tuple[float, float]:
        shrink = 1.0 - 2.0 * self.eta_assumed
        if parity == "odd":
            return 0.0, shrink * 3.0 * tau / 4.0
        if parity == "even":
            return tau, 0.0
        return tau / 2.0, shrink * tau / 4.0

    def _answer(self, query: ActiveQuery) -> float:
        return self.decomposed(query)


# ---------------------------------------------------------------------------
# unknown noise rate: try a geometric grid of guesses


def noise_grid(eta0: float, tau_min: float) -> list[float]:
    """Guesses eta_i with 1 - 2 eta_i = (1 + tau/4)^(-i), down to 1 - 2 eta0.

    For every true rate eta <= eta0 some guess has
    (1 - 2 eta) / (1 - 2 eta_i) in [1 - tau/4, 1 + tau/4].
    """
    if not 0.0 <= eta0 < 0.5:
        raise ValueError("eta0 must lie in [0, 1/2)")
    floor = 1.0 - 2.0 * eta0
    ratio = 1.0 + tau_min / 4.0
    guesses = []
    a = 1.0
    while a > floor:
        guesses.append((1.0 - a) / 2.0)
        a /= ratio
    guesses.append(eta0)
    return guesses


@dataclass
class GridResult:
    hypothesis: object
    eta: float
    grid: list[float]
    agreement: list[float]
    failures: dict = field(default_factory=dict)


def validation_size(epsilon: float, delta: float, k: int) -> int:
    return math.ceil(8.0 / epsilon**2 * math.log(2.0 * k / delta))


def noise_grid_wrapper(
    learn: Callable[[float], object],
    eta0: float,
    tau_min: float,
    validation_source: LabeledSource,
    epsilon: float,
    delta: float,
) -> GridResult:
    """Run ``learn(eta_guess)`` for every grid guess; keep the best on a fresh labelled sample.

    Hypotheses must provide ``predict(points) -> labels``. A guess whose run
    raises is skipped. If every guess fails, the last error is re-raised.
    """
    grid = noise_grid(eta0, tau_min)
    hyps: list[object | None] = []
    failures: dict = {}
    last_error: ActiveSQError | None = None
    for eta in grid:
        try:
            hyps.append(learn(eta))
        except ActiveSQError as err:
            hyps.append(None)
            failures[eta] = err.code
            last_error = err
    if all(h is None for h in hyps):
        raise last_error
    m = validation_size(epsilon, delta, len(grid))
    pts, labels = validation_source.labeled_sample(m)
    agreement = [(-1.0 if h is None else float(np.mean(h.predict(pts) == labels))) for h in hyps]
    best = int(np.argmax(agreement))
    return GridResult(hyps[best], grid[best], grid, agreement, failures)
