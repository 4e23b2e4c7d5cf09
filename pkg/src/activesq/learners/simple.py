"""Thresholds on [0, 1] and axis-aligned rectangles on [0, 1]^d."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import ActiveQuery, ContractViolated, NoDenseCell
from ..queries import AxisInterval, PositiveLabel

QUERY_TOLERANCE = 0.25


@dataclass(frozen=True)
class ThresholdHypothesis:
    theta_hat: float
    bracket: tuple[float, float]
    brackets: tuple[tuple[float, float], ...] = ()

    @property
    def iterations(self) -> int:
        return max(len(self.brackets) - 1, 0)

    def predict(self, points) -> np.ndarray:
        x = np.asarray(points, float).reshape(-1)
        return np.where(x >= self.theta_hat, 1, -1)


@dataclass(frozen=True)
class RectangleHypothesis:
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    queries: int = 0

    def predict(self, points) -> np.ndarray:
        x = np.asarray(points, float)
        if x.ndim == 1:
            x = x[:, None]
        inside = np.all((x >= np.asarray(self.lows)) & (x <= np.asarray(self.highs)), axis=1)
        return np.where(inside, 1, -1)


def _positive_fraction(oracle, a: float, b: float) -> float:
    query = ActiveQuery(AxisInterval(a, b), PositiveLabel(), b - a, QUERY_TOLERANCE)
    return oracle.answer(query)


def _search_edge(oracle, a: float, b: float, eps: float, rising: bool) -> list[tuple[float, float]]:
    """Shrink [a, b] around a label change point until it is at most eps long.

    rising: labels are -1 left of the edge and +1 right of it, so the positive
    fraction on [a, b] is (b - edge)/(b - a). Otherwise it is (edge - a)/(b - a).
    """
    brackets = [(a, b)]
    while b - a > eps:
        v = _positive_fraction(oracle, a, b)
        width = b - a
        if rising:
            lo, hi = b - (v + QUERY_TOLERANCE) * width, b - (v - QUERY_TOLERANCE) * width
        else:
            lo, hi = a + (v - QUERY_TOLERANCE) * width, a + (v + QUERY_TOLERANCE) * width
        lo, hi = max(lo, a), min(hi, b)
        if lo > hi:
            raise ContractViolated(f"answer {v} leaves no consistent edge in [{a}, {b}]")
        a, b = lo, hi
        brackets.append((a, b))
    return brackets


def learn_threshold(oracle, eps: float) -> ThresholdHypothesis:
    """Binary search for theta with one tolerance-1/4 query per halving."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    brackets = _search_edge(oracle, 0.0, 1.0, eps, rising=True)
    a, b = brackets[-1]
    return ThresholdHypothesis((a + b) / 2.0, (a, b), tuple(brackets))


def rectangle_query_bound(d: int, eps: float, beta: float) -> int:
    """Worst-case number of queries issued by :func:`learn_rectangle`."""
    return d * (math.ceil(2.0 / beta) + 2 * math.ceil(math.log2(2.0 * d / eps)))


def learn_rectangle(oracles: Sequence, eps: float, beta: float) -> RectangleHypothesis:
    """Learn a box from one interval oracle per axis, each to accuracy eps / d.

    Per axis: scan ceil(2/beta) equal cells for one whose positive fraction is
    reported >= 3/4 (its midpoint is then inside the target), then locate the
    two edges on either side with tolerance-1/4 binary searches.
    """
    d = len(oracles)
    if d < 1:
        raise ValueError("need at least one axis")
    cells = math.ceil(2.0 / beta)
    width = 1.0 / cells
    edge_eps = eps / (2.0 * d)
    lows, highs = [], []
    queries = 0
    for axis, oracle in enumerate(oracles):
        mid = None
        for j in range(cells):
            a, b = j * width, (j + 1) * width
            queries += 1
            if _positive_fraction(oracle, a, b) >= 0.75:
                mid = (a + b) / 2.0
                break
        if mid is None:
            raise NoDenseCell(f"no cell on axis {axis} reported a positive fraction >= 3/4")
        left = _search_edge(oracle, 0.0, mid, edge_eps, rising=True)
        right = _search_edge(oracle, mid, 1.0, edge_eps, rising=False)
        queries += len(left) + len(right) - 2
        lows.append(sum(left[-1]) / 2.0)
        highs.append(sum(right[-1]) / 2.0)
    return RectangleHypothesis(tuple(lows), tuple(highs), queries)

