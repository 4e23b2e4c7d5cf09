"""Margin-based active learning of halfspaces over isotropic log-concave marginals.

Round k conditions on an average of band indicators around the previous
hypotheses and asks a passive SQ learner for a halfspace that is accurate on
that filtered distribution.  The passive learner is pluggable; the default is
an averaging estimate followed by rotations chosen by SQ line searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from ..core import ActiveQuery, NoProgress, UnitVector, ZeroVector
from ..distributions import Marginal, band_constant, band_probability, plane_radial_cdf
from ..queries import AllPoints, Band, BandMixture, Disagreement, LabelCoordinate, MistakeCoordinate
from .. import quadrature
from .uniform import HalfspaceHypothesis


# ---------------------------------------------------------------------------
# constants


def wedge_tail(marginal: Marginal, alpha: float, t: float) -> float:
    """Pr[h_u != h_v and |<v, x>| >= t] for unit vectors at angle alpha."""
    if alpha <= 0:
        return 0.0

    def f(phi):
        return 1.0 - plane_radial_cdf(marginal, t / np.maximum(np.sin(phi), 1e-300))

    return quadrature.integrate(f, 0.0, alpha, tol=1e-12) / math.pi


@lru_cache(maxsize=None)
def fit_margin_constant(marginal: Marginal, c1: float, grid: int = 120) -> float:
    """Smallest c2 on a fine grid with wedge_tail(alpha, c2 alpha) <= c1 alpha for alpha < pi/2."""
    alphas = np.geomspace(1e-4, math.pi / 2 - 1e-6, grid)

    def worst(c2: float) -> float:
        return max(wedge_tail(marginal, a, c2 * a) / a for a in alphas) - c1

    lo, hi = 0.0, 1.0
    while worst(hi) > 0:
        lo, hi = hi, hi * 2.0
    return optimize.brentq(worst, lo, hi, xtol=1e-6) + 1e-6


@dataclass(frozen=True)
class LogcConstants:
    """c (angle-to-error), C1 (margin), C2 = c/(8 C1), C3 = c_m C2 c."""

    c: float
    C1: float
    C2: float
    C3: float
    c_m: float
    marginal: Marginal | None = None

    def __post_init__(self) -> None:
        if not math.isclose(self.C2, self.c / (8.0 * self.C1), rel_tol=1e-12):
            raise ValueError("C2 must equal c / (8 C1)")
        if not math.isclose(self.C3, self.c_m * self.C2 * self.c, rel_tol=1e-12):
            raise ValueError("C3 must equal c_m C2 c")

    @classmethod
    def build(cls, c: float, C1: float, c_m: float, marginal: Marginal | None = None) -> LogcConstants:
        C2 = c / (8.0 * C1)
        return cls(c, C1, C2, c_m * C2 * c, c_m, marginal)

    @classmethod
    def for_marginal(cls, marginal: Marginal) -> LogcConstants:
        # spherically symmetric marginals have error = angle / pi exactly
        c = 1.0 / math.pi
        return cls.build(c, fit_margin_constant(marginal, c / 16.0), band_constant(marginal), marginal)

    def rounds(self, eps: float) -> int:
        return max(math.ceil(math.log2(1.0 / (self.c * eps)) - 1e-12), 0)

    def margin(self, k: int) -> float:
        """b_k = C1 / 2^k."""
        return self.C1 / 2.0**k


# ---------------------------------------------------------------------------
# passive learner plumbing


@dataclass
class FilteredView:
    """An oracle seen through a fixed filter: SQs about D_{|chi} become active SQs."""

    oracle: object
    filter: object
    filter_tolerance: float

    def ask(self, query, tau: float) -> float:
        return self.oracle.answer(ActiveQuery(self.filter, query, self.filter_tolerance, min(tau, 1.0)))


PassiveSqLearner = Callable[[FilteredView, float, int], HalfspaceHypothesis]

CLIP_SCALE = 8.0
STALL_LIMIT = 10


def _rotate(v: np.ndarray, direction: np.ndarray, angle: float) -> np.ndarray:
    return math.cos(angle) * v + math.sin(angle) * direction


def passive_sq_averaging(view: FilteredView, eps: float, d: int, max_iterations: int = 60) -> HalfspaceHypothesis:
    """Mean of l * x as a first guess, then perceptron-style rotations.

    Each refinement step measures the mistake vector E[l x 1{h_v(x) != l}],
    keeps its part orthogonal to v, and rotates v in that plane by the angle
    that minimises the SQ-estimated error (bounded scalar search).
    Stops when the estimated error is at most 3 eps / 4. Error estimates use
    tolerance eps / 4, so the true error is then at most eps.
    """
    tau_vec = eps / (4.0 * math.sqrt(d))
    tau_err = eps / 4.0
    g = np.array([view.ask(LabelCoordinate(j, CLIP_SCALE), tau_vec) for j in range(d)])
    if np.linalg.norm(g) < 1e-12:
        raise ZeroVector("first moment of l * x vanished")
    v = g / np.linalg.norm(g)

    def error(vec: np.ndarray) -> float:
        return view.ask(Disagreement(UnitVector(vec)), tau_err)

    err = error(v)
    history = [err]
    best, stall = err, 0
    for _ in range(max_iterations):
        if err <= 0.75 * eps:
            break
        unit = UnitVector(v)
        m = np.array([view.ask(MistakeCoordinate(unit, j, CLIP_SCALE), tau_vec) for j in range(d)])
        m_perp = m - (m @ v) * v
        norm = np.linalg.norm(m_perp)
        if norm < 1e-15:
            stall += 1
        else:
            direction = m_perp / norm
            # the error of a halfspace is at least c * angle, so the useful rotation is bounded
            reach = min(math.pi / 2, 4.0 * math.pi * max(err, eps))
            res = optimize.minimize_scalar(
                lambda a: error(_rotate(v, direction, a)),
                bounds=(-0.25 * reach, reach),
                method="bounded",
                options={"xatol": 1e-4 * reach},
            )
            cand = _rotate(v, direction, float(res.x))
            cand /= np.linalg.norm(cand)
            cand_err = error(cand)
            if cand_err < err:
                v, err = cand, cand_err
        history.append(err)
        if err < best - 1e-12:
            best, stall = err, 0
        else:
            stall += 1
        if stall >= STALL_LIMIT:
            raise NoProgress(f"estimated error stuck at {best:.3g} above target {eps:.3g}")
    return HalfspaceHypothesis(UnitVector(v), {"estimated_errors": history})


# ---------------------------------------------------------------------------
# the active learner


def active_learn_hs_logc(
    oracle,
    eps: float,
    d: int,
    passive: PassiveSqLearner = passive_sq_averaging,
    consts: LogcConstants | None = None,
) -> HalfspaceHypothesis:
    """Margin-shrinking rounds; round k learns on the average of the first k band filters."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if consts is None:
        consts = LogcConstants.for_marginal(Marginal.gaussian(d))
    w = passive(FilteredView(oracle, AllPoints(), 1.0), consts.C2, d).normal
    normals = [w.coords.tolist()]
    bands: list[Band] = []
    masses: list[float] = []
    for k in range(1, consts.rounds(eps) + 1):
        bands.append(Band(w, consts.margin(k - 1)))
        chi = BandMixture(tuple(bands))
        view = FilteredView(oracle, chi, consts.C3 * eps)
        if consts.marginal is not None and consts.marginal.symmetric:
            masses.append(float(np.mean([band_probability(consts.marginal, b.normal, b.width) for b in bands])))
        w = passive(view, consts.C2 / k, d).normal
        normals.append(w.coords.tolist())
    trace = {"round_normals": normals, "filter_masses": masses, "filter_tolerance": consts.C3 * eps}
    return HalfspaceHypothesis(w, trace)
