"""Halfspace learning under the uniform distribution on the sphere.

Every coordinate of the target w is recovered from two distances, with
v' = (v + b u)/|v + b u|:

    <u, w> = (|v + b u| (2 - |v' - w|^2) - 2 + |v - w|^2) / (2 b),

and each distance comes from an error probability, or in the active version
from the conditional error inside a band around the current guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import constants
from ..core import ActiveQuery, UnitVector, ZeroVector
from ..geometry import CpdContext, cpd_eval, cpd_invert, error_to_distance
from ..queries import Agreement, AllPoints, Band

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HalfspaceHypothesis:
    normal: UnitVector
    trace: dict = field(default_factory=dict, compare=False, hash=False)

    def predict(self, points) -> np.ndarray:
        x = np.asarray(points, float)
        return np.where(x @ self.normal.coords >= 0.0, 1, -1)


def _normalise(vec: np.ndarray) -> UnitVector:
    if float(np.linalg.norm(vec)) < constants.ZERO_VECTOR_NORM:
        raise ZeroVector("aggregated normal vanished; oracle answers were out of tolerance")
    return UnitVector(vec)


def passive_tolerance(eps: float, d: int) -> float:
    """Correlation tolerance 2 eps / (10 pi sqrt d), i.e. eps / (10 pi sqrt d) on error rates."""
    return 2.0 * eps / (10.0 * math.pi * math.sqrt(d))


def _error_rate(oracle, v: UnitVector, tau: float) -> float:
    mu = oracle.answer(ActiveQuery(AllPoints(), Agreement(v), 1.0, tau))
    return min(max((1.0 - mu) / 2.0, 0.0), 1.0)


def learn_hs_u_passive(oracle, eps: float, d: int, base: UnitVector | None = None) -> HalfspaceHypothesis:
    """d + 1 unfiltered queries: the error of v and of (v + e_i/2)/|v + e_i/2| for every i."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    tau = passive_tolerance(eps, d)
    v = base if base is not None else UnitVector.basis(d, 0)
    dist = error_to_distance(_error_rate(oracle, v, tau))
    gamma = 1.0 - dist * dist / 2.0  # <v, w> when dist is exact
    coords = np.empty(d)
    for i in range(d):
        shifted = v.coords.copy()
        shifted[i] += 0.5
        scale = float(np.linalg.norm(shifted))
        dist_i = error_to_distance(_error_rate(oracle, UnitVector(shifted), tau))
        coords[i] = scale * (2.0 - dist_i * dist_i) - 2.0 * gamma
    return HalfspaceHypothesis(_normalise(coords), {"coordinates": coords.tolist(), "tolerance": tau})


# ---------------------------------------------------------------------------
# distances from conditional errors in a band

INVERSION_FRACTION = 1.0 / 16.0  # inversion tolerance as a fraction of the query tolerance


def measure_distance(oracle, v: UnitVector, rho: float, delta_max: float) -> float:
    """Estimate |v - w| to within rho, given |v - w| <= delta_max (d >= 4).

    One query: the correlation of h_v with the label inside the band
    |<v, x>| <= delta_max / (2 sqrt d). The conditional error (1 - corr)/2 is
    then mapped back to a distance through cp_d.
    """
    d = v.dimension
    if d < 4:
        raise ValueError("distance measurement needs d >= 4")
    if not 0.0 < rho < delta_max:
        raise ValueError("need 0 < rho < delta_max")
    gamma = min(delta_max / (2.0 * math.sqrt(d)), 1.0)
    tau = rho / (28.0 * delta_max)
    query = ActiveQuery(Band(v, gamma), Agreement(v), min(delta_max / 8.0, 1.0), min(tau, 1.0))
    corr = oracle.answer(query)
    top = min(delta_max, SQRT2)
    rho_inv = INVERSION_FRACTION * tau
    ctx = CpdContext(d, gamma, tol=min(1e-10, rho_inv / 100.0), rho_inv=rho_inv)
    ceiling = cpd_eval(ctx, top)
    error = min(max((1.0 - corr) / 2.0, 0.0), ceiling)
    return min(max(cpd_invert(ctx, error, top), 0.0), delta_max)


def stage_count(eps: float) -> int:
    """Main-loop iterations: ceil(log2(1/eps)) - 2, never negative."""
    return max(math.ceil(math.log2(1.0 / eps) - 1e-12) - 2, 0)


def min_tolerance_ratio() -> float:
    """Smallest issued tolerance times sqrt(d) over a run: 1/(24*2*28) from the perturbed points."""
    return 1.0 / (24.0 * 2.0 * 28.0)


def active_learn_hs_u(oracle, eps: float, d: int) -> HalfspaceHypothesis:
    """Halve the distance to w every stage using band-conditioned distance measurements."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if d < 4:
        hyp = learn_hs_u_passive(oracle, eps, d)
        return HalfspaceHypothesis(hyp.normal, {"fallback": "passive", **hyp.trace})
    first = learn_hs_u_passive(oracle, 1.0 / (2.0 * math.pi), d)
    u = first.normal
    normals = [u.coords.tolist()]
    root_d = math.sqrt(d)
    for t in range(1, stage_count(eps) + 1):
        step = 2.0 ** (-t)
        base_dist = measure_distance(oracle, u, 1.0 / (8.0 * 2**t * root_d), step)
        coords = np.empty(d)
        for i in range(d):
            shifted = u.coords.copy()
            shifted[i] += step
            scale = float(np.linalg.norm(shifted))
            dist_i = measure_distance(oracle, UnitVector(shifted), 1.0 / (24.0 * 2**t * root_d), 2.0 * step)
            coords[i] = 2.0 ** (t - 1) * (scale * (2.0 - dist_i**2) - 2.0 + base_dist**2)
        u = _normalise(coords)
        normals.append(u.coords.tolist())
    return HalfspaceHypothesis(u, {"stage_normals": normals})
