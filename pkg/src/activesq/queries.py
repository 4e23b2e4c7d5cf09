"""Structured filters and queries.

These are ordinary callables, so every oracle can evaluate them pointwise,
but they also expose enough structure for closed-form evaluation in the
exact backend and for count-level simulation in the sampling backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UnitVector, halfspace_sign


# -- filters ----------------------------------------------------------------


@dataclass(frozen=True)
class AllPoints:
    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.ones(points.shape[0])


@dataclass(frozen=True)
class AxisInterval:
    """Indicator of lo <= x[axis] <= hi."""

    lo: float
    hi: float
    axis: int = 0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        x = points[:, self.axis]
        return ((x >= self.lo) & (x <= self.hi)).astype(float)


@dataclass(frozen=True)
class Band:
    """Indicator of |<normal, x>| <= width."""

    normal: UnitVector
    width: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return (np.abs(points @ self.normal.coords) <= self.width).astype(float)


@dataclass(frozen=True)
class BandMixture:
    """Average of several band indicators (a real-valued filter)."""

    bands: tuple[Band, ...]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        acc = np.zeros(points.shape[0])
        for band in self.bands:
            acc += band(points)
        return acc / len(self.bands)


# -- queries ----------------------------------------------------------------


@dataclass(frozen=True)
class PositiveLabel:
    """phi(x, l) = (l + 1) / 2."""

    parity = None

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return (np.asarray(labels, float) + 1.0) / 2.0


@dataclass(frozen=True)
class Agreement:
    """phi(x, l) = h_v(x) * l, the correlation of a halfspace with the label."""

    normal: UnitVector
    parity = "odd"

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return halfspace_sign(self.normal.coords, points) * np.asarray(labels, float)


@dataclass(frozen=True)
class Disagreement:
    """phi(x, l) = 1[h_v(x) != l]."""

    normal: UnitVector
    parity = None

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return (halfspace_sign(self.normal.coords, points) != np.asarray(labels)).astype(float)


@dataclass(frozen=True)
class LabelCoordinate:
    """phi(x, l) = l * clip(x[axis] / scale, -1, 1)."""

    axis: int
    scale: float
    parity = "odd"

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return np.asarray(labels, float) * np.clip(points[:, self.axis] / self.scale, -1.0, 1.0)


@dataclass(frozen=True)
class MistakeCoordinate:
    """phi(x, l) = l * clip(x[axis] / scale, -1, 1) on points that h_v gets wrong."""

    normal: UnitVector
    axis: int
    scale: float
    parity = None

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        lab = np.asarray(labels, float)
        wrong = halfspace_sign(self.normal.coords, points) != lab
        return lab * np.clip(points[:, self.axis] / self.scale, -1.0, 1.0) * wrong


@dataclass(frozen=True)
class PointFunction:
    """Wrap a label-free function g(x) as a query phi(x, l) = g(x)."""

    fn: object
    parity = "even"

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(points), float)
