"""Closed-form and quadrature evaluation of filtered expectations.

For the spherically symmetric marginals every structured query depends on x
only through its projection y onto a span of at most three directions: the
band normal, the target and the hypothesis.  Writing y = R u with u uniform
on S^2 and R independent of u, and putting the band normal at the pole, the
band condition only involves the polar angle, while sign patterns of <a, u>
cut the azimuth circle into arcs.  The azimuthal integrals are then
elementary and a single adaptive quadrature over the polar angle remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .. import quadrature
from ..core import UnitVector
from ..distributions import (
    HalfspaceTarget,
    Marginal,
    MarginalKind,
    RectangleTarget,
    ThresholdTarget,
    space_radial_cdf,
    space_radial_partial_mean,
    space_radius_bound,
)
from ..queries import (
    Agreement,
    AllPoints,
    AxisInterval,
    Band,
    BandMixture,
    Disagreement,
    LabelCoordinate,
    MistakeCoordinate,
    PositiveLabel,
)

_QUAD_TOL = 1e-11
_HALF_PI = math.pi / 2


class NotStructured(Exception):
    """The (filter, query, source) combination has no closed form here."""


# ---------------------------------------------------------------------------
# geometry of the 3-D reduction


def _frame(pole: np.ndarray, others: list[np.ndarray]) -> np.ndarray:
    """Orthonormal rows (pole, e1, e2) whose span contains ``others``."""
    basis = [pole / np.linalg.norm(pole)]
    for vec in others:
        resid = vec - sum((vec @ b) * b for b in basis)
        norm = np.linalg.norm(resid)
        if norm > 1e-12 and len(basis) < 3:
            basis.append(resid / norm)
    d = pole.shape[0]
    # pad with arbitrary orthogonal directions; they carry no weight in the integrals
    k = 0
    while len(basis) < 3 and k < d:
        e = np.zeros(d)
        e[k] = 1.0
        resid = e - sum((e @ b) * b for b in basis)
        if np.linalg.norm(resid) > 1e-6:
            basis.append(resid / np.linalg.norm(resid))
        k += 1
    return np.array(basis)


@dataclass(frozen=True)
class _Arc:
    """Set of azimuths where <a, u(theta, phi)> >= 0: [centre - half, centre + half]."""

    centre: float
    half: np.ndarray


def _arc(coords: np.ndarray, theta: np.ndarray) -> _Arc:
    a_pole, a1, a2 = coords
    m = math.hypot(a1, a2)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    if m < 1e-15:
        half = np.where(a_pole * cos_t >= 0.0, math.pi, 0.0)
        return _Arc(0.0, half)
    prod = a_pole * cos_t
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = -prod / (m * sin_t)
    # on the pole itself the arc is everything, nothing, or (if prod = 0) half the circle
    edge = np.where(prod > 0, -np.inf, np.where(prod < 0, np.inf, 0.0))
    kappa = np.where(sin_t > 0, kappa, edge)
    half = np.arccos(np.clip(kappa, -1.0, 1.0))
    return _Arc(math.atan2(a2, a1), half)


def _arc_overlap(x: _Arc, y: _Arc) -> np.ndarray:
    gap = abs(math.remainder(x.centre - y.centre, 2 * math.pi))
    total = np.zeros_like(x.half)
    for shift in (gap - 2 * math.pi, gap, gap + 2 * math.pi):
        lo = np.maximum(-x.half, shift - y.half)
        hi = np.minimum(x.half, shift + y.half)
        total += np.maximum(hi - lo, 0.0)
    return total


def _tangent_angles(coords: np.ndarray) -> list[float]:
    """Polar angles in (0, pi/2) where an arc appears or vanishes."""
    a_pole, a1, a2 = coords
    m = math.hypot(a1, a2)
    if m < 1e-15 or abs(a_pole) < 1e-15:
        return []
    return [math.atan2(abs(a_pole), m)]


class _BandIntegrator:
    """Expectations of the form E[1{|<p, x>| <= c} * G(x)] for one band."""

    def __init__(self, marginal: Marginal, pole: np.ndarray, width: float, directions: list[np.ndarray]):
        self.marginal = marginal
        self.width = width
        self.frame = _frame(pole, directions)
        self.breaks = [_HALF_PI]
        r_max = space_radius_bound(marginal)
        if math.isfinite(width) and width < r_max:
            self.breaks.append(math.acos(width / r_max))
        for vec in directions:
            self.breaks.extend(_tangent_angles(self.frame @ vec))

    def _radial(self, theta: np.ndarray, moment: int) -> np.ndarray:
        cos_t = np.cos(theta)
        if math.isinf(self.width):
            r = np.full_like(theta, np.inf)
        else:
            with np.errstate(divide="ignore"):
                r = np.where(cos_t > 0, self.width / cos_t, np.inf)
        r = np.minimum(r, 1e6)
        if moment == 0:
            return space_radial_cdf(self.marginal, r)
        return space_radial_partial_mean(self.marginal, r)

    def _integrate(self, f, extra=()) -> float:
        edges = [0.0, *sorted({b for b in (*self.breaks, *extra) if 0.0 < b < _HALF_PI}), _HALF_PI]
        lo = np.array(edges[:-1])
        span = np.diff(edges)

        # smoothstep substitution on every piece: square-root behaviour of the
        # arc widths at the piece ends becomes smooth in the new variable
        def g(s, k):
            x = lo[k][:, None] + span[k][:, None] * (3 * s * s - 2 * s**3)
            jac = span[k][:, None] * 6 * s * (1 - s)
            return f(x) * jac

        n = len(lo)
        vals = quadrature.integrate_batch(g, np.zeros(n), np.ones(n), _QUAD_TOL / n)
        return float(vals.sum())

    def _overlap_kinks(self, ca: np.ndarray, cb: np.ndarray) -> list[float]:
        """Polar angles where the two sign arcs start or stop overlapping."""
        arc_a0, arc_b0 = _arc(ca, np.array([0.0])), _arc(cb, np.array([0.0]))
        gap = abs(math.remainder(arc_a0.centre - arc_b0.centre, 2 * math.pi))

        def gaps(theta):
            theta = np.atleast_1d(theta)
            ha, hb = _arc(ca, theta).half, _arc(cb, theta).half
            return np.stack([ha + hb - gap, ha + hb - (2 * math.pi - gap), ha - hb - gap, hb - ha - gap])

        grid = np.linspace(1e-9, _HALF_PI - 1e-9, 97)
        vals = gaps(grid)
        roots = []
        for row in range(vals.shape[0]):
            flips = np.flatnonzero(np.sign(vals[row, :-1]) * np.sign(vals[row, 1:]) < 0)
            for j in flips:
                roots.append(optimize.brentq(lambda t: gaps(t)[row, 0], grid[j], grid[j + 1], xtol=1e-14))
        return roots

    def mass(self) -> float:
        return self._integrate(lambda t: np.sin(t) * self._radial(t, 0))

    def sign_product(self, a: np.ndarray, b: np.ndarray) -> float:
        """E[chi * sgn<a,x> * sgn<b,x>]."""
        ca, cb = self.frame @ a, self.frame @ b

        def f(theta):
            arc_a, arc_b = _arc(ca, theta), _arc(cb, theta)
            inner = (4 * _arc_overlap(arc_a, arc_b) - 4 * arc_a.half - 4 * arc_b.half + 2 * math.pi) / (2 * math.pi)
            return np.sin(theta) * self._radial(theta, 0) * inner

        return self._integrate(f, self._overlap_kinks(ca, cb))

    def signed_first_moment(self, a: np.ndarray) -> np.ndarray:
        """E[chi * sgn<a,x> * x] as a vector in R^d."""
        ca = self.frame @ a

        def comp(which):
            def f(theta):
                arc = _arc(ca, theta)
                if which == 0:
                    inner = np.cos(theta) * (4 * arc.half - 2 * math.pi) / (2 * math.pi)
                elif which == 1:
                    inner = np.sin(theta) * 4 * np.sin(arc.half) * math.cos(arc.centre) / (2 * math.pi)
                else:
                    inner = np.sin(theta) * 4 * np.sin(arc.half) * math.sin(arc.centre) / (2 * math.pi)
                return np.sin(theta) * self._radial(theta, 1) * inner

            return f

        coeffs = np.array([self._integrate(comp(k)) for k in range(3)])
        return coeffs @ self.frame


# ---------------------------------------------------------------------------
# dispatch


def _bands(filt) -> list[tuple[np.ndarray | None, float, float]]:
    """(pole, width, weight) triples describing a band-type filter."""
    if isinstance(filt, AllPoints):
        return [(None, math.inf, 1.0)]
    if isinstance(filt, Band):
        return [(filt.normal.coords, float(filt.width), 1.0)]
    if isinstance(filt, BandMixture):
        k = len(filt.bands)
        return [(b.normal.coords, float(b.width), 1.0 / k) for b in filt.bands]
    raise NotStructured(type(filt).__name__)


class SymmetricExpectations:
    """Cached band primitives for a spherically symmetric marginal and halfspace target."""

    def __init__(self, marginal: Marginal, target: HalfspaceTarget):
        if not marginal.symmetric or marginal.d < 3:
            raise NotStructured("needs a spherically symmetric marginal with d >= 3")
        self.marginal = marginal
        self.w = target.normal.coords
        self._cache: dict = {}

    def _integrator(self, pole, width, dirs) -> _BandIntegrator:
        if pole is None:
            pole = self.w
        return _BandIntegrator(self.marginal, pole, width, dirs)

    def _key(self, *parts):
        return tuple(p.tobytes() if isinstance(p, np.ndarray) else p for p in parts)

    def mass(self, filt) -> float:
        total = 0.0
        for pole, width, weight in _bands(filt):
            if math.isinf(width):
                total += weight
                continue
            key = self._key("mass", width)
            if key not in self._cache:
                self._cache[key] = self._integrator(pole, width, []).mass()
            total += weight * self._cache[key]
        return total

    def sign_correlation(self, filt, direction: np.ndarray | None) -> float:
        """E[chi * h_w * s] where s = sgn<direction, x>, or s = 1 when direction is None."""
        if direction is None:
            return 0.0  # band filters are symmetric under x -> -x while h_w is odd
        total = 0.0
        for pole, width, weight in _bands(filt):
            key = self._key("corr", pole, width, direction)
            if key not in self._cache:
                integ = self._integrator(pole, width, [self.w, direction])
                self._cache[key] = integ.sign_product(self.w, direction)
            total += weight * self._cache[key]
        return total

    def signed_moment(self, filt, direction: np.ndarray) -> np.ndarray:
        total = np.zeros_like(self.w)
        for pole, width, weight in _bands(filt):
            key = self._key("moment", pole, width, direction)
            if key not in self._cache:
                integ = self._integrator(pole, width, [self.w, direction])
                self._cache[key] = integ.signed_first_moment(direction)
            total = total + weight * self._cache[key]
        return total

    def clip_error_bound(self, scale: float) -> float:
        """Upper bound on E[|x_j| ; |x_j| > scale]; zero when clipping never triggers."""
        if self.marginal.kind is MarginalKind.GAUSSIAN:
            return 2.0 * math.exp(-0.5 * scale * scale) / math.sqrt(2 * math.pi)
        bound = 1.0 if self.marginal.kind is MarginalKind.UNIFORM_SPHERE else self.marginal.ball_radius
        return 0.0 if scale >= bound else math.inf

    def joint(self, filt, query) -> tuple[float, float, float]:
        """(E[chi phi], E[chi], certified absolute error of E[chi phi])."""
        mass = self.mass(filt)
        if isinstance(query, Agreement):
            return self.sign_correlation(filt, query.normal.coords), mass, 0.0
        if isinstance(query, Disagreement):
            corr = self.sign_correlation(filt, query.normal.coords)
            return 0.5 * (mass - corr), mass, 0.0
        if isinstance(query, PositiveLabel):
            return 0.5 * mass, mass, 0.0
        if isinstance(query, LabelCoordinate):
            vec = self.signed_moment(filt, self.w)
            return vec[query.axis] / query.scale, mass, self.clip_error_bound(query.scale) / query.scale
        if isinstance(query, MistakeCoordinate):
            # l * x * 1[h_v != l] = x * (l - h_v) / 2 for l = h_w
            vec = 0.5 * (self.signed_moment(filt, self.w) - self.signed_moment(filt, query.normal.coords))
            return vec[query.axis] / query.scale, mass, self.clip_error_bound(query.scale) / query.scale
        raise NotStructured(type(query).__name__)


# ---------------------------------------------------------------------------
# interval / cube marginals


def _overlap(lo1: float, hi1: float, lo2: float, hi2: float) -> float:
    return max(0.0, min(hi1, hi2) - max(lo1, lo2))


def box_joint(marginal: Marginal, target, filt, query) -> tuple[float, float, float]:
    """Uniform [0,1]^d marginal, threshold or rectangle target, axis-interval filter."""
    if marginal.kind not in (MarginalKind.UNIFORM_INTERVAL, MarginalKind.UNIFORM_CUBE):
        raise NotStructured("not a box marginal")
    if not isinstance(query, PositiveLabel):
        raise NotStructured(type(query).__name__)
    if isinstance(filt, AllPoints):
        axis, lo, hi = 0, 0.0, 1.0
    elif isinstance(filt, AxisInterval):
        axis, lo, hi = filt.axis, max(0.0, filt.lo), min(1.0, filt.hi)
    else:
        raise NotStructured(type(filt).__name__)
    mass = max(hi - lo, 0.0)
    if isinstance(target, ThresholdTarget):
        return _overlap(lo, hi, target.theta, 1.0), mass, 0.0
    if isinstance(target, RectangleTarget):
        others = 1.0
        for j, (a, b) in enumerate(zip(target.lows, target.highs)):
            if j != axis:
                others *= _overlap(0.0, 1.0, a, b)
        return _overlap(lo, hi, target.lows[axis], target.highs[axis]) * others, mass, 0.0
    raise NotStructured(type(target).__name__)


# ---------------------------------------------------------------------------
# two-valued queries: phi = offset + scale * l * s(x)


@dataclass(frozen=True)
class TwoValuedForm:
    """phi(x, l) = offset + scale * l * s(x) with s(x) = sgn<direction, x> (or 1)."""

    offset: float
    scale: float
    direction: UnitVector | None


def two_valued_form(query) -> TwoValuedForm | None:
    if isinstance(query, Agreement):
        return TwoValuedForm(0.0, 1.0, query.normal)
    if isinstance(query, Disagreement):
        return TwoValuedForm(0.5, -0.5, query.normal)
    if isinstance(query, PositiveLabel):
        return TwoValuedForm(0.5, 0.5, None)
    return None


def _box_sign_correlation(marginal, target, filt) -> tuple[float, float]:
    pos, mass, _ = box_joint(marginal, target, filt, PositiveLabel())
    return 2.0 * pos - mass, mass


class ExpectationModel:
    """Front door used by the oracles: exact filtered expectations for a source."""

    def __init__(self, marginal: Marginal, target):
        self.marginal = marginal
        self.target = target
        self._sym = None
        if marginal.symmetric and isinstance(target, HalfspaceTarget) and marginal.d >= 3:
            self._sym = SymmetricExpectations(marginal, target)

    def joint(self, filt, query) -> tuple[float, float, float]:
        if self._sym is not None:
            return self._sym.joint(filt, query)
        return box_joint(self.marginal, self.target, filt, query)

    def mass(self, filt) -> float:
        if self._sym is not None:
            return self._sym.mass(filt)
        return box_joint(self.marginal, self.target, filt, PositiveLabel())[1]

    def label_sign_correlation(self, filt, direction: UnitVector | None) -> tuple[float, float]:
        """(E[chi * h_target * s], E[chi]) for the sign function s of a two-valued query."""
        if self._sym is not None:
            vec = None if direction is None else direction.coords
            return self._sym.sign_correlation(filt, vec), self._sym.mass(filt)
        if direction is not None:
            raise NotStructured("sign directions need a halfspace target")
        return _box_sign_correlation(self.marginal, self.target, filt)


def expectation_model(source) -> ExpectationModel | None:
    """Model for ``source`` or None when no closed form applies (cached on the source)."""
    cached = getattr(source, "_expectation_model", None)
    if cached is not None:
        return cached
    marginal, target = source.marginal, source.target
    ok = (marginal.symmetric and isinstance(target, HalfspaceTarget) and marginal.d >= 3) or (
        marginal.kind in (MarginalKind.UNIFORM_INTERVAL, MarginalKind.UNIFORM_CUBE)
        and isinstance(target, (ThresholdTarget, RectangleTarget))
    )
    model = ExpectationModel(marginal, target) if ok else None
    try:
        source._expectation_model = model
    except AttributeError:
        pass
    return model
