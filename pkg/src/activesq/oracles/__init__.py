"""Interchangeable answering backends for active statistical queries."""

from ..core import ActiveQuery, TargetIndependentQuery
from .base import Diagnostic, StatOracle
from .dp import DpOracle, PrivateDatabase, filtered_mean
from .exact import ExactOracle
from .noise import GridResult, RcnOracle, UncorrelatedOracle, noise_grid, noise_grid_wrapper, validation_size
from .sampling import SamplingOracle


def answer_exact(query: ActiveQuery, source) -> float:
    return ExactOracle(source).answer(query)


def answer_sampling(query: ActiveQuery, source, delta: float) -> float:
    return SamplingOracle(source, delta).answer(query)


def answer_rcn(query: ActiveQuery, source, eta_assumed: float, delta: float) -> float:
    return RcnOracle(source, eta_assumed, delta).answer(query)


def answer_uncorrelated(query: ActiveQuery, source, eta_assumed: float, delta: float) -> float:
    return UncorrelatedOracle(source, eta_assumed, delta).answer(query)


def answer_dp(query: ActiveQuery, db: PrivateDatabase, alpha: float, delta: float, max_queries: int = 1,
              rng=0) -> float:
    return DpOracle(db, alpha, delta, max_queries, rng).answer(query)


def answer_target_independent(query: TargetIndependentQuery, backend: StatOracle) -> float:
    return backend.answer_target_independent(query)


__all__ = [
    "Diagnostic",
    "DpOracle",
    "ExactOracle",
    "GridResult",
    "PrivateDatabase",
    "RcnOracle",
    "SamplingOracle",
    "StatOracle",
    "UncorrelatedOracle",
    "answer_dp",
    "answer_exact",
    "answer_rcn",
    "answer_sampling",
    "answer_target_independent",
    "answer_uncorrelated",
    "filtered_mean",
    "noise_grid",
    "noise_grid_wrapper",
    "validation_size",
]
