"""Conditional disagreement of two halfspaces inside a margin band.

cp_d(gamma, Delta) is the probability, for x uniform on S_{d-1}, that h_v and
h_w disagree given |<v, x>| <= gamma, where |v - w| = Delta.  It is the ratio

    int_0^gamma (1-r^2)^((d-3)/2) F(r) dr  /  int_0^gamma (1-r^2)^((d-3)/2) dr

with F(r) the normalised tail int_L^1 (1-s^2)^((d-4)/2) ds of the slice
through r.  With theta = 2 asin(Delta / 2) the angle between v and w, the
slice point (r, s) is misclassified when s >= r cot(theta) / sqrt(1 - r^2) =: L.
F vanishes once r >= sin(theta), so the outer range is cut there.  Both integrals are
taken after the substitutions r = sin(phi), s = sin(theta), which remove the
endpoint singularities of the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .. import quadrature

SQRT2 = math.sqrt(2.0)
_TINY_DISTANCE = 1e-14
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class CpdContext:
    d: int
    gamma: float
    tol: float = 1e-10
    rho_inv: float = 1e-9

    def __post_init__(self) -> None:
        if self.d < 4:
            raise ValueError(f"cp_d needs d >= 4, got {self.d}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.tol <= 0 or self.rho_inv <= 0:
            raise ValueError("tolerances must be positive")

    @classmethod
    def for_accuracy(cls, d: int, gamma: float, rho: float, tol: float = 1e-10) -> CpdContext:
        """Inversion tolerance that turns into at most rho/2 of distance error."""
        return cls(d, gamma, tol, rho / (56.0 * gamma * math.sqrt(d)) / 2.0)

    def with_rho_inv(self, rho_inv: float) -> CpdContext:
        return replace(self, rho_inv=rho_inv)


@lru_cache(maxsize=None)
def _cos_integral(power: float, lo: float, hi: float) -> float:
    return quadrature.integrate(lambda t: np.cos(t) ** power, lo, hi, tol=1e-14)


def _slice_tails(theta_lo: np.ndarray, d: int, tol: float) -> np.ndarray:
    """F for every lower angle in ``theta_lo`` (any shape)."""
    flat = theta_lo.reshape(-1)
    out = np.zeros_like(flat)
    live = flat < math.pi / 2
    if np.any(live):
        power = d - 3.0
        total = _cos_integral(power, -math.pi / 2, math.pi / 2)
        vals = quadrature.integrate_batch(
            lambda x, _k: np.cos(x) ** power,
            flat[live],
            np.full(int(live.sum()), math.pi / 2),
            tol * total,
        )
        out[live] = vals / total
    return out.reshape(theta_lo.shape)


def cpd_eval(ctx: CpdContext, delta: float) -> float:
    """Pr[h_v(x) != h_w(x) | |<v, x>| <= gamma] for |v - w| = delta, x uniform on the sphere."""
    if delta < 0.0 or delta > SQRT2 + 1e-12:
        raise ValueError(f"delta must lie in [0, sqrt(2)], got {delta}")
    delta = min(delta, SQRT2)
    if delta < _TINY_DISTANCE:
        return 0.0
    d, gamma = ctx.d, ctx.gamma
    theta = 2.0 * math.asin(delta / 2.0)
    slope = max(math.cos(theta), 0.0) / math.sin(theta)
    phi_hi = math.asin(min(gamma, math.sin(theta)))
    denom = _cos_integral(d - 2.0, 0.0, math.asin(gamma))
    inner_tol = ctx.tol / 11.0
    outer_tol = ctx.tol * 10.0 / 11.0 * denom

    def integrand(phi: np.ndarray, _k: np.ndarray) -> np.ndarray:
        r = np.sin(phi)
        lower = np.clip(slope * r / np.sqrt(1.0 - r * r), 0.0, 1.0)
        return np.cos(phi) ** (d - 2.0) * _slice_tails(np.arcsin(lower), d, inner_tol)

    num = quadrature.integrate_batch(integrand, np.array([0.0]), np.array([phi_hi]), outer_tol)[0]
    return float(min(max(num / denom, 0.0), 0.5))


def cpd_derivative_fd(ctx: CpdContext, delta: float, h: float) -> float:
    """Central difference (cp(delta + h) - cp(delta - h)) / 2h inside the regime of the slope bound."""
    if not 0.0 < h <= delta / 10.0:
        raise ValueError("step must satisfy 0 < h <= delta / 10")
    if ctx.gamma < delta / (2.0 * math.sqrt(ctx.d)) - 1e-15:
        raise ValueError("band must satisfy gamma >= delta / (2 sqrt(d))")
    if delta + h > SQRT2:
        raise ValueError("delta + h must not exceed sqrt(2)")
    return (cpd_eval(ctx, delta + h) - cpd_eval(ctx, delta - h)) / (2.0 * h)


def derivative_lower_bound(d: int, gamma: float) -> float:
    return 1.0 / (56.0 * gamma * math.sqrt(d))


@lru_cache(maxsize=512)
def _bracket_table(d: int, gamma: float, tol: float, delta_max: float, nodes: int = 33):
    ctx = CpdContext(d, gamma, tol)
    grid = np.linspace(0.0, delta_max, nodes)
    values = np.array([cpd_eval(ctx, float(x)) for x in grid])
    grid.setflags(write=False)
    values.setflags(write=False)
    return grid, values


def cpd_invert(ctx: CpdContext, mu: float, delta_max: float) -> float:
    """Find delta in [0, delta_max] with |cp_d(gamma, delta) - mu| <= rho_inv by bisection.

    A coarse cached table of cp_d values only narrows the starting bracket; the
    bisection itself evaluates cp_d directly.  Targets outside the attainable
    range return the nearer endpoint.
    """
    if not 0.0 < delta_max <= SQRT2 + 1e-12:
        raise ValueError(f"delta_max must lie in (0, sqrt(2)], got {delta_max}")
    delta_max = min(delta_max, SQRT2)
    if mu <= 0.0:
        return 0.0
    grid, values = _bracket_table(ctx.d, ctx.gamma, ctx.tol, delta_max)
    if mu >= values[-1]:
        return delta_max
    j = int(np.searchsorted(values, mu, side="right")) - 1
    j = min(max(j, 0), len(grid) - 2)
    lo, hi = float(grid[j]), float(grid[j + 1])
    f_lo, f_hi = float(values[j]), float(values[j + 1])
    if abs(f_lo - mu) <= ctx.rho_inv and abs(f_lo - mu) <= abs(f_hi - mu):
        return lo
    if abs(f_hi - mu) <= ctx.rho_inv:
        return hi
    mid = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid = cpd_eval(ctx, mid)
        if abs(f_mid - mu) <= ctx.rho_inv or hi - lo <= 1e-15:
            break
        if f_mid < mu:
            lo = mid
        else:
            hi = mid
    return mid
