"""Reference backend: the true conditional expectation, no sampling error.

Structured queries are evaluated in closed form or by quadrature (see
``expectations``).  Anything else falls back to Monte Carlo, run until six
standard errors fit inside a tenth of the requested tolerance.
"""

from __future__ import annotations

import math

import numpy as np

from .. import constants
from ..core import ActiveQuery, RngStream, TargetIndependentQuery
from ..distributions import LabeledSource, band_probability
from ..queries import Band
from .base import StatOracle
from .expectations import NotStructured, expectation_model


def _ratio_mc(sample, weight_fn, value_fn, accuracy: float, rng: np.random.Generator):
    """Estimate E[w f] / E[w] until 6 standard errors are below ``accuracy``.

    Returns (estimate, mean weight, certified flag).
    """
    sw = swf = swf2 = sw2 = swwf = 0.0
    n = 0
    while n < constants.MC_MAX_SAMPLES:
        pts = sample(rng, constants.MC_BATCH)
        w = weight_fn(pts)
        f = value_fn(pts)
        sw += w.sum()
        swf += (w * f).sum()
        sw2 += (w * w).sum()
        swf2 += (w * f * w * f).sum()
        swwf += (w * w * f).sum()
        n += pts.shape[0]
        if sw <= 0.0:
            continue
        ratio = swf / sw
        mean_w = sw / n
        # delta-method variance of the ratio estimator: Var(w f - r w) / (n E[w]^2)
        resid_var = (swf2 - 2 * ratio * swwf + ratio * ratio * sw2) / n
        se = math.sqrt(max(resid_var, 0.0) / n) / mean_w
        if constants.MC_SIGMAS * se <= accuracy:
            return ratio, mean_w, True
    if sw <= 0.0:
        return 0.0, 0.0, False
    return swf / sw, sw / n, False


class ExactOracle(StatOracle):
    """Noise-free answers for a labelled source; consumes no samples from it."""

    name = "exact"

    def __init__(self, source: LabeledSource, rng: np.random.Generator | RngStream | int = 0, tally=None):
        super().__init__(tally)
        self.source = source
        if isinstance(rng, RngStream):
            rng = rng.generator()
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.model = expectation_model(source)

    @property
    def dimension(self) -> int:
        return self.source.d

    def filter_mass(self, filt) -> float:
        if self.model is not None:
            try:
                return self.model.mass(filt)
            except NotStructured:
                pass
        marginal = self.source.marginal
        pts = marginal.sample(self.rng, 1_000_000)
        return float(np.clip(filt(pts), 0.0, 1.0).mean())

    def conditional(self, query: ActiveQuery) -> tuple[float, float]:
        """(E_{A|chi}[phi], E_D[chi]) for the clean distribution."""
        accuracy = constants.EXACT_ACCURACY_FRACTION * query.query_tolerance
        if self.model is not None:
            try:
                num, mass, err = self.model.joint(query.filter, query.query)
                if mass > 0 and err / mass <= accuracy:
                    return num / mass, mass
            except NotStructured:
                pass
        src = self.source
        value, mass, certified = _ratio_mc(
            src.marginal.sample,
            query.filter_values,
            lambda pts: query.query_values(pts, src.clean_labels(pts)),
            accuracy,
            self.rng,
        )
        if not certified:
            self.flag("uncertified", tolerance=query.query_tolerance)
        return value, mass

    def _answer(self, query: ActiveQuery) -> float:
        value, mass = self.conditional(query)
        if mass < query.filter_tolerance:
            self.flag("low-mass", mass=mass, filter_tolerance=query.filter_tolerance)
            return 0.0
        return value

    def _answer_unlabeled(self, query: TargetIndependentQuery) -> float:
        marginal = self.source.marginal
        if isinstance(query.query, Band) and marginal.symmetric:
            return band_probability(marginal, query.query.normal, query.query.width)
        accuracy = constants.EXACT_ACCURACY_FRACTION * query.tolerance
        value, _, certified = _ratio_mc(
            marginal.sample, lambda pts: np.ones(pts.shape[0]), query.values, accuracy, self.rng
        )
        if not certified:
            self.flag("uncertified", tolerance=query.tolerance)
        return value
