"""Shared value types, usage accounting and seeded random streams."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


# ---------------------------------------------------------------------------
# errors


class ActiveSQError(Exception):
    """Base class for recoverable failures; ``code`` is a stable short tag."""

    code = "active-sq-error"


class InsufficientAcceptance(ActiveSQError):
    code = "insufficient-acceptance"


class DatabaseExhausted(ActiveSQError):
    code = "database-exhausted"


class ContractViolated(ActiveSQError):
    code = "contract-violated"


class ZeroVector(ActiveSQError):
    code = "zero-vector"


class NoProgress(ActiveSQError):
    code = "no-progress"


class BudgetExhausted(ActiveSQError):
    code = "budget-exhausted"


class UnsupportedMarginal(ActiveSQError):
    code = "unsupported-marginal"


class NoDenseCell(ActiveSQError):
    code = "no-dense-cell"


# ---------------------------------------------------------------------------
# small helpers


def clamp_query_output(raw: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return min(hi, max(lo, raw))


def as_points(points: Any) -> np.ndarray:
    """Coerce to a 2-D float array of shape (n, d); scalars become d = 1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    return arr


def halfspace_sign(normal: np.ndarray, points: np.ndarray) -> np.ndarray:
    """h_v(x) = sgn(<v, x>) with the convention sgn(0) = +1."""
    return np.where(points @ normal >= 0.0, 1, -1)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class LabeledExample:
    point: tuple[float, ...]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")
        object.__setattr__(self, "point", tuple(float(p) for p in np.atleast_1d(self.point)))

    @property
    def dimension(self) -> int:
        return len(self.point)


class UnitVector:
    """A point on the unit sphere S_{d-1}, stored as a read-only array."""

    __slots__ = ("_coords",)

    def __init__(self, coords: Any) -> None:
        arr = np.array(coords, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(arr))
        if not np.isfinite(norm) or norm < 1e-12:
            raise ZeroVector(f"cannot normalize vector of norm {norm:g}")
        arr = arr / norm
        # one refinement pass keeps |norm - 1| well below 1e-12 in every dimension
        arr = arr / np.sqrt(arr @ arr)
        arr.setflags(write=False)
        self._coords = arr

    @classmethod
    def basis(cls, d: int, i: int) -> UnitVector:
        e = np.zeros(d)
        e[i] = 1.0
        return cls(e)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> UnitVector:
        while True:
            g = rng.standard_normal(d)
            if np.linalg.norm(g) > 1e-9:
                return cls(g)

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def dimension(self) -> int:
        return self._coords.shape[0]

    def dot(self, other: UnitVector | np.ndarray) -> float:
        o = other.coords if isinstance(other, UnitVector) else np.asarray(other, float)
        return float(self._coords @ o)

    def distance(self, other: UnitVector) -> float:
        return float(np.linalg.norm(self._coords - other.coords))

    def angle(self, other: UnitVector) -> float:
        return float(np.arccos(np.clip(self.dot(other), -1.0, 1.0)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._coords, dtype=dtype)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UnitVector) and np.array_equal(self._coords, other._coords)

    def __hash__(self) -> int:
        return hash(self._coords.tobytes())

    def __repr__(self) -> str:
        return f"UnitVector({np.array2string(self._coords, precision=4)})"


class NoiseKind(str, enum.Enum):
    NONE = "none"
    RCN = "rcn"
    PER_POINT = "per_point"


@dataclass(frozen=True)
class NoiseModel:
    """Label corruption: none, uniform flips at rate eta, or a per-point rate Lambda(x).

    ``flip_probability`` must accept an (n, d) array and return n rates in [0, 1].
    """

    kind: NoiseKind = NoiseKind.NONE
    eta: float = 0.0
    flip_probability: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta < 0.5:
            raise ValueError(f"noise rate must lie in [0, 1/2), got {self.eta}")
        if self.kind is NoiseKind.PER_POINT and self.flip_probability is None:
            raise ValueError("per-point noise needs a flip probability function")
        if self.kind is NoiseKind.NONE and self.eta != 0.0:
            raise ValueError("noise kind 'none' must have eta = 0")

    @classmethod
    def none(cls) -> NoiseModel:
        return cls()

    @classmethod
    def rcn(cls, eta: float) -> NoiseModel:
        return cls(NoiseKind.RCN, float(eta))

    @classmethod
    def per_point(cls, flip_probability: Callable[[np.ndarray], np.ndarray], eta: float) -> NoiseModel:
        return cls(NoiseKind.PER_POINT, float(eta), flip_probability)

    def rates(self, points: np.ndarray) -> np.ndarray:
        n = points.shape[0]
        if self.kind is NoiseKind.NONE:
            return np.zeros(n)
        if self.kind is NoiseKind.RCN:
            return np.full(n, self.eta)
        return np.clip(np.asarray(self.flip_probability(points), float).reshape(n), 0.0, 1.0)


class UsageKind(str, enum.Enum):
    LABELS = "labels"
    UNLABELED = "unlabeled"
    ACTIVE_QUERIES = "active_queries"
    TARGET_INDEPENDENT_QUERIES = "target_independent_queries"


@dataclass
class BudgetTally:
    labels_used: int = 0
    unlabeled_used: int = 0
    active_queries: int = 0
    target_independent_queries: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    _FIELDS = {
        UsageKind.LABELS: "labels_used",
        UsageKind.UNLABELED: "unlabeled_used",
        UsageKind.ACTIVE_QUERIES: "active_queries",
        UsageKind.TARGET_INDEPENDENT_QUERIES: "target_independent_queries",
    }

    def add(self, kind: UsageKind | str, n: int) -> BudgetTally:
        if n < 0:
            raise ValueError("tally increments must be non-negative")
        name = self._FIELDS[UsageKind(kind)]
        with self._lock:
            setattr(self, name, getattr(self, name) + int(n))
        return self

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in self._FIELDS.values()}

    def merged(self, other: BudgetTally) -> BudgetTally:
        out = BudgetTally()
        for name in self._FIELDS.values():
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out


def tally_add(tally: BudgetTally, kind: UsageKind | str, n: int) -> BudgetTally:
    return tally.add(kind, n)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by (seed, stream_id).

    Sub-streams extend the id path, so adding a consumer never shifts
    another consumer's draws.
    """

    seed: int
    stream_id: int | tuple[int, ...] = 0

    @property
    def path(self) -> tuple[int, ...]:
        sid = self.stream_id
        return tuple(sid) if isinstance(sid, tuple) else (int(sid),)

    def child(self, *keys: int) -> RngStream:
        return RngStream(self.seed, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))


# ---------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class ActiveQuery:
    """Filter chi, query phi and the two tolerances (tau_0 for the filter, tau for the answer).

    ``filter`` maps an (n, d) array to n values and ``query`` maps (points, labels)
    to n values; both are clamped on evaluation.
    """

    filter: Callable[[np.ndarray], np.ndarray]
    query: Callable[[np.ndarray, np.ndarray], np.ndarray]
    filter_tolerance: float
    query_tolerance: float

    def __post_init__(self) -> None:
        for name in ("filter_tolerance", "query_tolerance"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {val}")

    def filter_values(self, points: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.filter(points), dtype=float).reshape(points.shape[0])
        return np.clip(vals, 0.0, 1.0)

    def query_values(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.query(points, labels), dtype=float).reshape(points.shape[0])
        return np.clip(vals, -1.0, 1.0)

    @property
    def label_parity(self) -> str | None:
        """'odd' when phi(x, -l) = -phi(x, l), 'even' when phi ignores the label."""
        return getattr(self.query, "parity", None)


@dataclass(frozen=True)
class TargetIndependentQuery:
    query: Callable[[np.ndarray], np.ndarray]
    tolerance: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tolerance <= 1.0:
            raise ValueError(f"tolerance must lie in (0, 1], got {self.tolerance}")

    def values(self, points: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.query(points), dtype=float).reshape(points.shape[0])
        return np.clip(vals, -1.0, 1.0)
