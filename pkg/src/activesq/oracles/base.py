"""Common oracle plumbing: tallies, diagnostics and the log of issued tolerances."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

from ..core import ActiveQuery, BudgetTally, TargetIndependentQuery, UsageKind


@dataclass
class Diagnostic:
    code: str
    detail: dict = field(default_factory=dict)


class StatOracle(abc.ABC):
    """Answers active and target-independent statistical queries.

    Every call is logged: ``issued`` holds (filter tolerance, query tolerance)
    per active query and ``diagnostics`` collects flags such as ``low-mass``.
    Learners must not branch on diagnostics.
    """

    name = "abstract"

    def __init__(self, tally: BudgetTally | None = None):
        self.tally = tally if tally is not None else BudgetTally()
        self.issued: list[tuple[float, float]] = []
        self.diagnostics: list[Diagnostic] = []

    def answer(self, query: ActiveQuery) -> float:
        self.tally.add(UsageKind.ACTIVE_QUERIES, 1)
        self.issued.append((query.filter_tolerance, query.query_tolerance))
        return float(self._answer(query))

    def answer_target_independent(self, query: TargetIndependentQuery) -> float:
        self.tally.add(UsageKind.TARGET_INDEPENDENT_QUERIES, 1)
        return float(self._answer_unlabeled(query))

    def flag(self, code: str, **detail) -> None:
        self.diagnostics.append(Diagnostic(code, detail))

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    @abc.abstractmethod
    def _answer(self, query: ActiveQuery) -> float: ...

    @abc.abstractmethod
    def _answer_unlabeled(self, query: TargetIndependentQuery) -> float: ...
