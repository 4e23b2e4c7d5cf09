"""Differentially private answers from a fixed labelled database.

Each query takes the next unused block of records. Only records that pass the
Bernoulli(chi) filter are labelled. The answer is the empirical mean over
those records plus Laplace noise at scale 1 / (alpha |T|). One record moves
the mean by at most 1/|T|, so this is the standard Laplace mechanism, and
disjoint blocks compose in parallel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import constants
from ..core import (
    ActiveQuery,
    BudgetTally,
    DatabaseExhausted,
    RngStream,
    TargetIndependentQuery,
    UsageKind,
)
from .base import StatOracle


@dataclass
class PrivateDatabase:
    """Records (points, labels) consumed front to back; ``audit`` logs every block."""

    points: np.ndarray
    labels: np.ndarray
    cursor: int = 0
    audit: list[tuple[int, int, int]] = field(default_factory=list)  # (query index, start, stop)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.labels = np.asarray(self.labels, int).reshape(-1)
        if self.points.shape[0] != self.labels.shape[0]:
            raise ValueError("points and labels differ in length")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def remaining(self) -> int:
        return len(self) - self.cursor

    def take(self, n: int, query_index: int) -> slice:
        if n > self.remaining:
            raise DatabaseExhausted(f"block of {n} records requested, {self.remaining} left")
        block = slice(self.cursor, self.cursor + n)
        self.audit.append((query_index, self.cursor, self.cursor + n))
        self.cursor += n
        return block

    @classmethod
    def from_source(cls, source, n: int) -> PrivateDatabase:
        """Draw n labelled records without charging the source's tally."""
        pts = source.marginal.sample(source.rng, n)
        labels = source.target.label(pts)
        rates = source.noise.rates(pts)
        flips = source.rng.random(n) < rates
        return cls(pts, np.where(flips, -labels, labels))

    @classmethod
    def from_csv(cls, path: str | Path) -> PrivateDatabase:
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(rows[:, :-1], rows[:, -1].astype(int))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for x, y in zip(self.points, self.labels):
                writer.writerow([repr(float(v)) for v in x] + [int(y)])


def filtered_mean(query: ActiveQuery, points: np.ndarray, labels: np.ndarray, u: np.ndarray) -> tuple[float, int]:
    """Pre-noise answer on a block: mean of phi over records with u < chi(x)."""
    keep = u < query.filter_values(points)
    count = int(keep.sum())
    if count == 0:
        return 0.0, 0
    return float(np.mean(query.query_values(points[keep], labels[keep]))), count


class DpOracle(StatOracle):
    """alpha-differentially private oracle over a database, for a declared query budget."""

    name = "dp"

    def __init__(self, db: PrivateDatabase, alpha: float, delta: float, max_queries: int,
                 rng: np.random.Generator | RngStream | int = 0, tally: BudgetTally | None = None):
        if alpha <= 0:
            raise ValueError("privacy parameter must be positive")
        super().__init__(tally)
        self.db = db
        self.alpha = alpha
        self.delta = delta
        self.max_queries = max_queries
        if isinstance(rng, RngStream):
            rng = rng.generator()
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.block_sizes: list[int] = []
        self.filtered_sizes: list[int] = []
        self._count = 0

    @property
    def dimension(self) -> int:
        return self.db.dimension

    def laplace_scale(self, filtered: int) -> float:
        return 1.0 / (self.alpha * filtered)

    def _answer(self, query: ActiveQuery) -> float:
        n = constants.dp_block_size(query.filter_tolerance, query.query_tolerance, self.alpha,
                                    self.max_queries, self.delta)
        block = self.db.take(n, self._count)
        self._count += 1
        self.tally.add(UsageKind.UNLABELED, n)
        u = self.rng.random(n)
        mean, filtered = filtered_mean(query, self.db.points[block], self.db.labels[block], u)
        self.tally.add(UsageKind.LABELS, filtered)
        self.block_sizes.append(n)
        self.filtered_sizes.append(filtered)
        if filtered == 0:
            self.flag("low-mass", block=n)
            return 0.0
        return mean + float(self.rng.laplace(0.0, self.laplace_scale(filtered)))

    def _answer_unlabeled(self, query: TargetIndependentQuery) -> float:
        n = constants.dp_unlabeled_block(query.tolerance, self.alpha, self.max_queries, self.delta)
        block = self.db.take(n, self._count)
        self._count += 1
        self.tally.add(UsageKind.UNLABELED, n)
        mean = float(np.mean(query.values(self.db.points[block])))
        return mean + float(self.rng.laplace(0.0, 1.0 / (self.alpha * n)))
