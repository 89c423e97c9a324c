"""Domain types shared across the package.

Percentages stay on the 0-100 scale as given by the experts; conversion to
[0, 1] happens only where a probability is actually computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

PROB_TOL = 1e-9
MIN_RESPONSES = 2
MAX_RESPONSES = 5

CellKey = tuple[str, str]


@dataclass(frozen=True)
class IntervalAssessment:
    """A consensus lo-hi percentage range for one response."""

    lo: float
    hi: float

    @property
    def midpoint(self) -> float:
        return (self.lo + self.hi) / 200.0

    @property
    def half_range(self) -> float:
        return (self.hi - self.lo) / 200.0

    def problems(self) -> list[str]:
        out = []
        for name, v in (("lo", self.lo), ("hi", self.hi)):
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                out.append(f"{name}={v!r} is not a finite number")
            elif not 0 <= v <= 100:
                out.append(f"{name}={v} outside [0, 100]")
        if not out and self.lo > self.hi:
            out.append(f"lo={self.lo} > hi={self.hi}")
        return out

    def __str__(self) -> str:
        return f"{_fmt_pct(self.lo)}-{_fmt_pct(self.hi)}%"


def _fmt_pct(x: float) -> str:
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return s or "0"


@dataclass(frozen=True)
class QuestionSchema:
    id: str
    responses: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(self.responses))

    @property
    def k(self) -> int:
        return len(self.responses)

    def index(self, response: str) -> int:
        try:
            return self.responses.index(response)
        except ValueError:
            raise KeyError(
                f"response {response!r} is not a valid answer to question {self.id!r}"
            ) from None


@dataclass(frozen=True)
class AssessmentTable:
    """The disease x question grid of interval assessments.

    ``cells`` maps ``(disease, question_id)`` to a tuple of intervals
    aligned with that question's response order.
    """

    diseases: tuple[str, ...]
    questions: tuple[QuestionSchema, ...]
    cells: Mapping[CellKey, tuple[IntervalAssessment, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "diseases", tuple(self.diseases))
        object.__setattr__(self, "questions", tuple(self.questions))
        object.__setattr__(
            self, "cells", {key: tuple(cell) for key, cell in self.cells.items()}
        )

    def question(self, question_id: str) -> QuestionSchema:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise KeyError(f"unknown question {question_id!r}")

    def cell(self, disease: str, question_id: str) -> tuple[IntervalAssessment, ...]:
        return self.cells[(disease, question_id)]

    def keys(self) -> list[CellKey]:
        """All (disease, question) pairs in presentation order."""
        return [(d, q.id) for d in self.diseases for q in self.questions]


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    disease: str
    answers: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "answers", dict(self.answers))


@dataclass(frozen=True)
class DirichletCell:
    """Implicit-sample form of one conditional distribution.

    ``counts`` are pseudo-counts aligned with ``responses`` and may be
    fractional. A degenerate cell had every response assessed 0-0% or
    100-100%; its size is a finite stand-in for infinity and it never learns.
    """

    responses: tuple[str, ...]
    counts: tuple[float, ...]
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(self.responses))
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if len(self.responses) != len(self.counts):
            raise ValueError(
                f"{len(self.counts)} counts for {len(self.responses)} responses"
            )
        if any(not (c >= 0 and math.isfinite(c)) for c in self.counts):
            raise ValueError(f"pseudo-counts must be finite and >= 0, got {self.counts}")

    @property
    def total(self) -> float:
        return math.fsum(self.counts)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.responses, self.counts))


def check_probability_vector(values: Sequence[float]) -> tuple[float, ...]:
    p = tuple(float(v) for v in values)
    if any(not (0.0 <= v <= 1.0) for v in p):
        raise ValueError(f"probabilities must lie in [0, 1]: {p}")
    if abs(math.fsum(p) - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {math.fsum(p)!r}, not 1")
    return p


def check_outcome_vector(values: Sequence[int]) -> int:
    """Validate an indicator vector and return the index of the observed response."""
    e = tuple(values)
    if any(v not in (0, 1) for v in e) or sum(e) != 1:
        raise ValueError(f"outcome vector must have exactly one 1 and zeros elsewhere: {e}")
    return e.index(1)


def outcome_vector(k: int, observed: int) -> tuple[int, ...]:
    if not 0 <= observed < k:
        raise IndexError(f"observed index {observed} out of range for k={k}")
    return tuple(int(i == observed) for i in range(k))


def validate_table(table: AssessmentTable) -> list[str]:
    """Return a description of every invariant violation in ``table``.

    An empty list means the table is usable. Nothing is raised.
    """
    violations = []
    if len(set(table.diseases)) != len(table.diseases):
        violations.append("duplicate disease labels")
    seen_q = set()
    for q in table.questions:
        if q.id in seen_q:
            violations.append(f"duplicate question {q.id!r}")
        seen_q.add(q.id)
        if len(set(q.responses)) != q.k:
            violations.append(f"question {q.id!r}: duplicate response labels")
        if not MIN_RESPONSES <= q.k <= MAX_RESPONSES:
            violations.append(
                f"question {q.id!r}: {q.k} responses, expected "
                f"{MIN_RESPONSES}..{MAX_RESPONSES}"
            )

    known = {(d, q.id) for d in table.diseases for q in table.questions}
    for key in table.cells:
        if key not in known:
            violations.append(f"cell {key!r} does not match any disease/question")

    for d in table.diseases:
        for q in table.questions:
            cell = table.cells.get((d, q.id))
            if cell is None:
                violations.append(f"({d!r}, {q.id!r}): missing cell")
                continue
            if len(cell) != q.k:
                violations.append(
                    f"({d!r}, {q.id!r}): {len(cell)} intervals for {q.k} responses"
                )
            for resp, iv in zip(q.responses, cell):
                for problem in iv.problems():
                    violations.append(f"({d!r}, {q.id!r}, {resp!r}): {problem}")
    return violations


def validate_case(case: CaseRecord, table: AssessmentTable) -> list[str]:
    violations = []
    if case.disease not in table.diseases:
        violations.append(f"case {case.case_id!r}: unknown disease {case.disease!r}")
    for qid, resp in case.answers.items():
        try:
            q = table.question(qid)
        except KeyError:
            violations.append(f"case {case.case_id!r}: unknown question {qid!r}")
            continue
        if resp not in q.responses:
            violations.append(
                f"case {case.case_id!r}: response {resp!r} is not a valid answer "
                f"to question {qid!r}"
            )
    return violations
