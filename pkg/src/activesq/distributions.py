"""Marginal distributions, labelled example sources and projection laws."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from . import quadrature
from .core import (
    BudgetTally,
    NoiseKind,
    NoiseModel,
    RngStream,
    UnitVector,
    UnsupportedMarginal,
    UsageKind,
    as_points,
    halfspace_sign,
)


class MarginalKind(str, enum.Enum):
    UNIFORM_SPHERE = "sphere"
    GAUSSIAN = "gaussian"
    UNIFORM_BALL = "ball"
    UNIFORM_INTERVAL = "interval"
    UNIFORM_CUBE = "cube"


SPHERICALLY_SYMMETRIC = frozenset(
    {MarginalKind.UNIFORM_SPHERE, MarginalKind.GAUSSIAN, MarginalKind.UNIFORM_BALL}
)


@dataclass(frozen=True)
class Marginal:
    """Distribution of unlabelled points.

    The ball is scaled to radius sqrt(d + 2) so that its covariance is the identity.
    Interval and cube are the uniform laws on [0, 1] and [0, 1]^d used by the
    threshold and rectangle learners.
    """

    kind: MarginalKind
    d: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MarginalKind(self.kind))
        if self.kind is MarginalKind.UNIFORM_INTERVAL:
            if self.d != 1:
                raise ValueError("the interval marginal is one-dimensional")
        elif self.kind is MarginalKind.UNIFORM_CUBE:
            if self.d < 1:
                raise ValueError("dimension must be positive")
        elif self.d < 2:
            raise ValueError(f"{self.kind.value} marginal needs d >= 2")

    @classmethod
    def sphere(cls, d: int) -> Marginal:
        return cls(MarginalKind.UNIFORM_SPHERE, d)

    @classmethod
    def gaussian(cls, d: int) -> Marginal:
        return cls(MarginalKind.GAUSSIAN, d)

    @classmethod
    def ball(cls, d: int) -> Marginal:
        return cls(MarginalKind.UNIFORM_BALL, d)

    @classmethod
    def interval(cls) -> Marginal:
        return cls(MarginalKind.UNIFORM_INTERVAL, 1)

    @classmethod
    def cube(cls, d: int) -> Marginal:
        return cls(MarginalKind.UNIFORM_CUBE, d)

    @property
    def symmetric(self) -> bool:
        return self.kind in SPHERICALLY_SYMMETRIC

    @property
    def ball_radius(self) -> float:
        return math.sqrt(self.d + 2.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.d
        if self.kind is MarginalKind.UNIFORM_INTERVAL or self.kind is MarginalKind.UNIFORM_CUBE:
            return rng.random((n, d))
        g = rng.standard_normal((n, d))
        if self.kind is MarginalKind.GAUSSIAN:
            return g
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if self.kind is MarginalKind.UNIFORM_SPHERE:
            return g
        radius = self.ball_radius * rng.random(n) ** (1.0 / d)
        return g * radius[:, None]


# ---------------------------------------------------------------------------
# one-dimensional projection <v, x>


@lru_cache(maxsize=256)
def _cos_power_integral(k: float, upper: float) -> float:
    """Integral of cos(t)^k over [0, upper] by adaptive quadrature."""
    if upper <= 0.0:
        return 0.0
    return quadrature.integrate(lambda t: np.cos(t) ** k, 0.0, upper, tol=1e-13)


def _sphere_band(d: int, gamma: float) -> float:
    # density (1 - r^2)^((d-3)/2) on [-1, 1]; r = sin(t) turns it into cos(t)^(d-2)
    if gamma >= 1.0:
        return 1.0
    k = d - 2.0
    return _cos_power_integral(k, math.asin(gamma)) / _cos_power_integral(k, math.pi / 2)


def _ball_band(d: int, gamma: float) -> float:
    # <v, x>/R has density (1 - u^2)^((d-1)/2); u = sin(t) gives cos(t)^d
    u = gamma / math.sqrt(d + 2.0)
    if u >= 1.0:
        return 1.0
    return _cos_power_integral(float(d), math.asin(u)) / _cos_power_integral(float(d), math.pi / 2)


def band_probability(marginal: Marginal, v: UnitVector | None, gamma: float) -> float:
    """Pr[|<v, x>| <= gamma]; the built-in symmetric marginals do not depend on v."""
    if gamma < 0:
        raise ValueError("band half-width must be non-negative")
    kind = marginal.kind
    if kind is MarginalKind.UNIFORM_SPHERE:
        return _sphere_band(marginal.d, gamma)
    if kind is MarginalKind.UNIFORM_BALL:
        return _ball_band(marginal.d, gamma)
    if kind is MarginalKind.GAUSSIAN:
        return math.erf(gamma / math.sqrt(2.0))
    raise UnsupportedMarginal(f"no projection law for {kind.value}")


def projection_density(marginal: Marginal, t: np.ndarray) -> np.ndarray:
    """Density of <v, x> for a unit v."""
    t = np.asarray(t, float)
    d = marginal.d
    kind = marginal.kind
    if kind is MarginalKind.GAUSSIAN:
        return np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    if kind is MarginalKind.UNIFORM_SPHERE:
        scale, power = 1.0, (d - 3) / 2.0
        norm = 2.0 * _cos_power_integral(d - 2.0, math.pi / 2)
    elif kind is MarginalKind.UNIFORM_BALL:
        scale, power = math.sqrt(d + 2.0), (d - 1) / 2.0
        norm = 2.0 * scale * _cos_power_integral(float(d), math.pi / 2)
    else:
        raise UnsupportedMarginal(f"no projection law for {kind.value}")
    u = np.clip(np.abs(t) / scale, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        dens = np.where(np.abs(t) < scale, (1.0 - u * u) ** power, 0.0)
    return dens / norm


def disagreement_probability(marginal: Marginal, u: UnitVector, v: UnitVector) -> float:
    """Pr[h_u(x) != h_v(x)] = angle(u, v) / pi for spherically symmetric marginals."""
    if not marginal.symmetric:
        raise UnsupportedMarginal(f"{marginal.kind.value} is not spherically symmetric")
    return u.angle(v) / math.pi


@lru_cache(maxsize=64)
def band_constant(marginal: Marginal, grid: int = 2000) -> float:
    """Smallest ratio Pr[|<v,x>| <= a] / a over a in (0, 1], scanned on a grid."""
    ratios = [band_probability(marginal, None, a) / a for a in np.linspace(1.0 / grid, 1.0, grid)]
    return float(min(ratios))


# ---------------------------------------------------------------------------
# radial laws of low-dimensional projections (used by the exact oracle)


def plane_radial_cdf(marginal: Marginal, r: np.ndarray) -> np.ndarray:
    """Pr[|P x| <= r] where P projects onto a fixed 2-D subspace."""
    r = np.asarray(r, float)
    d = marginal.d
    kind = marginal.kind
    if kind is MarginalKind.GAUSSIAN:
        return -np.expm1(-0.5 * r * r)
    if kind is MarginalKind.UNIFORM_SPHERE:
        if d == 2:
            return (r >= 1.0).astype(float)
        u2 = np.minimum(r * r, 1.0)
        return 1.0 - (1.0 - u2) ** ((d - 2) / 2.0)
    if kind is MarginalKind.UNIFORM_BALL:
        u2 = np.minimum(r * r / (d + 2.0), 1.0)
        return 1.0 - (1.0 - u2) ** (d / 2.0)
    raise UnsupportedMarginal(f"no projection law for {kind.value}")


def space_radial_cdf(marginal: Marginal, r: np.ndarray) -> np.ndarray:
    """Pr[|P x| <= r] where P projects onto a fixed 3-D subspace (d >= 3)."""
    r = np.asarray(r, float)
    d = marginal.d
    kind = marginal.kind
    if kind is MarginalKind.GAUSSIAN:
        return special.gammainc(1.5, 0.5 * r * r)
    if kind is MarginalKind.UNIFORM_SPHERE:
        if d == 3:
            return (r >= 1.0).astype(float)
        return special.betainc(1.5, (d - 3) / 2.0, np.minimum(r * r, 1.0))
    if kind is MarginalKind.UNIFORM_BALL:
        return special.betainc(1.5, (d - 1) / 2.0, np.minimum(r * r / (d + 2.0), 1.0))
    raise UnsupportedMarginal(f"no projection law for {kind.value}")


def space_radial_partial_mean(marginal: Marginal, r: np.ndarray) -> np.ndarray:
    """E[|P x| ; |P x| <= r] for a 3-D projection P."""
    r = np.asarray(r, float)
    d = marginal.d
    kind = marginal.kind
    if kind is MarginalKind.GAUSSIAN:
        rr = np.minimum(r, 60.0)
        return math.sqrt(2.0 / math.pi) * (2.0 - (rr * rr + 2.0) * np.exp(-0.5 * rr * rr))
    if kind is MarginalKind.UNIFORM_SPHERE:
        if d == 3:
            return (r >= 1.0).astype(float)
        b = (d - 3) / 2.0
        ratio = math.exp(special.betaln(2.0, b) - special.betaln(1.5, b))
        return ratio * special.betainc(2.0, b, np.minimum(r * r, 1.0))
    if kind is MarginalKind.UNIFORM_BALL:
        b = (d - 1) / 2.0
        scale = math.sqrt(d + 2.0)
        ratio = math.exp(special.betaln(2.0, b) - special.betaln(1.5, b))
        return scale * ratio * special.betainc(2.0, b, np.minimum(r * r / (d + 2.0), 1.0))
    raise UnsupportedMarginal(f"no projection law for {kind.value}")


def space_radius_bound(marginal: Marginal) -> float:
    """Largest possible |P x| (infinity for the Gaussian)."""
    if marginal.kind is MarginalKind.UNIFORM_SPHERE:
        return 1.0
    if marginal.kind is MarginalKind.UNIFORM_BALL:
        return marginal.ball_radius
    return math.inf


# ---------------------------------------------------------------------------
# targets and labelled sources


@dataclass(frozen=True)
class HalfspaceTarget:
    normal: UnitVector

    def label(self, points: np.ndarray) -> np.ndarray:
        return halfspace_sign(self.normal.coords, points)


@dataclass(frozen=True)
class ThresholdTarget:
    """Positive exactly on x >= theta."""

    theta: float

    def label(self, points: np.ndarray) -> np.ndarray:
        return np.where(points[:, 0] >= self.theta, 1, -1)


@dataclass(frozen=True)
class RectangleTarget:
    """Positive inside the axis-aligned box prod_i [lows_i, highs_i]."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lows) != len(self.highs):
            raise ValueError("lows and highs must have the same length")
        if any(lo > hi for lo, hi in zip(self.lows, self.highs)):
            raise ValueError("each lower edge must not exceed the upper edge")

    def label(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        inside = np.all((points >= lo) & (points <= hi), axis=1)
        return np.where(inside, 1, -1)

    def axis(self, i: int) -> RectangleTarget:
        return RectangleTarget((self.lows[i],), (self.highs[i],))


@dataclass
class LabeledSource:
    """i.i.d. labelled examples: points from the marginal, labels from the noisy target.

    All unlabelled draws and label requests are charged to ``tally``.
    """

    marginal: Marginal
    target: HalfspaceTarget | ThresholdTarget | RectangleTarget
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    rng: np.random.Generator | RngStream | int = 0
    tally: BudgetTally = field(default_factory=BudgetTally)

    def __post_init__(self) -> None:
        if isinstance(self.rng, RngStream):
            self.rng = self.rng.generator()
        elif not isinstance(self.rng, np.random.Generator):
            self.rng = np.random.default_rng(self.rng)

    @property
    def d(self) -> int:
        return self.marginal.d

    def sample_unlabeled(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("sample size must be non-negative")
        self.tally.add(UsageKind.UNLABELED, n)
        return self.marginal.sample(self.rng, n)

    def clean_labels(self, points: np.ndarray) -> np.ndarray:
        """Noise-free labels; used for evaluation, never charged."""
        return self.target.label(as_points(points))

    def request_labels(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points)
        self.tally.add(UsageKind.LABELS, pts.shape[0])
        labels = self.target.label(pts)
        if self.noise.kind is not NoiseKind.NONE:
            flips = self.rng.random(pts.shape[0]) < self.noise.rates(pts)
            labels = np.where(flips, -labels, labels)
        return labels

    def request_label(self, point) -> int:
        return int(self.request_labels(np.asarray(point, float).reshape(1, -1))[0])

    def labeled_sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        pts = self.sample_unlabeled(n)
        return pts, self.request_labels(pts)
