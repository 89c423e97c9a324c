"""Conjugate updating of implicit samples with observed cases.

Each case adds one count to the (true disease, question, response) cell for
every question it answered. Prequential replay scores each case against the
probabilities current *before* that case, then learns from it.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from subjprob.calibration import reliability_stat
from subjprob.model import AssessmentTable, CaseRecord, CellKey, DirichletCell, validate_case
from subjprob.scoring import Forecast, ScoreRecord, evaluate, get_rule, observations

log = logging.getLogger(__name__)


class CaseValidationError(ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def posterior_update(cell: DirichletCell, observed: Mapping[str, float]) -> DirichletCell:
    """Add observed counts to the pseudo-counts.

    Degenerate cells are returned unchanged; callers account for the skip.
    """
    for label, c in observed.items():
        if label not in cell.responses:
            raise KeyError(f"unknown response label {label!r}")
        if not c >= 0:
            raise ValueError(f"negative count {c!r} for {label!r}")
    if cell.degenerate:
        return cell
    return DirichletCell(
        cell.responses,
        tuple(c + observed.get(r, 0) for r, c in zip(cell.responses, cell.counts)),
        cell.degenerate,
    )


def posterior_mean(cell: DirichletCell) -> tuple[float, ...]:
    total = cell.total
    if total <= 0:
        raise ZeroDivisionError("cell has zero total pseudo-count")
    return tuple(c / total for c in cell.counts)


def as_forecasts(cells: Mapping[CellKey, DirichletCell]) -> dict[CellKey, Forecast]:
    return {k: Forecast(c.responses, posterior_mean(c)) for k, c in cells.items()}


def _checked_cases(
    cases: Iterable[CaseRecord],
    cells: Mapping[CellKey, DirichletCell],
    table: AssessmentTable | None,
    strict: bool,
    rejected: list[str],
) -> Iterable[CaseRecord]:
    for case in cases:
        if table is not None:
            problems = validate_case(case, table)
        else:
            problems = case_problems(case, cells)
        if problems:
            if strict:
                raise CaseValidationError(problems)
            for p in problems:
                log.warning("skipping case: %s", p)
            rejected.extend(problems)
            continue
        yield case


def case_problems(case: CaseRecord, cells: Mapping[CellKey, DirichletCell]) -> list[str]:
    if not any(d == case.disease for d, _ in cells):
        return [f"case {case.case_id!r}: unknown disease {case.disease!r}"]
    out = []
    for qid, resp in case.answers.items():
        cell = cells.get((case.disease, qid))
        if cell is None:
            out.append(f"case {case.case_id!r}: unknown question {qid!r}")
        elif resp not in cell.responses:
            out.append(
                f"case {case.case_id!r}: response {resp!r} is not a valid answer "
                f"to question {qid!r}"
            )
    return out


@dataclass
class AdaptResult:
    cells: dict[CellKey, DirichletCell]
    skipped_updates: dict[CellKey, int] = field(default_factory=dict)
    rejected: list[str] = field(default_factory=list)


def _learn(cells: dict[CellKey, DirichletCell], case: CaseRecord, skipped: dict[CellKey, int]):
    for qid, resp in case.answers.items():
        key = (case.disease, qid)
        cell = cells[key]
        if cell.degenerate:
            skipped[key] = skipped.get(key, 0) + 1
            continue
        cells[key] = posterior_update(cell, {resp: 1})


def batch_adapt(
    cells: Mapping[CellKey, DirichletCell],
    cases: Iterable[CaseRecord],
    table: AssessmentTable | None = None,
    strict: bool = False,
) -> AdaptResult:
    """Combine prior implicit samples with every valid case.

    Invalid cases are logged and skipped, or raise
    :class:`CaseValidationError` when ``strict``. Cases are applied one at a
    time in the given order so the result matches :func:`prequential_replay`
    bit for bit.
    """
    result = AdaptResult(dict(cells))
    for case in _checked_cases(cases, cells, table, strict, result.rejected):
        _learn(result.cells, case, result.skipped_updates)
    return result


@dataclass(frozen=True)
class ReliabilityPoint:
    disease: str
    question: str
    r: float


@dataclass(frozen=True)
class TraceEntry:
    case_id: str
    scores: tuple[ScoreRecord, ...]
    cumulative: Mapping[str, float]
    # R of the initial (prior) forecast against this case's answers
    prior_reliability: tuple[ReliabilityPoint, ...]
    updated: tuple[CellKey, ...]
    skipped: tuple[CellKey, ...]


@dataclass
class PrequentialTrace:
    rules: tuple[str, ...]
    entries: list[TraceEntry]
    cells: dict[CellKey, DirichletCell]
    cumulative: dict[str, float]
    skipped_updates: dict[CellKey, int]
    rejected: list[str]


def prequential_replay(
    cells: Mapping[CellKey, DirichletCell],
    cases: Sequence[CaseRecord],
    rules: Sequence[str] = ("brier", "log"),
    table: AssessmentTable | None = None,
    strict: bool = False,
    log_floor: float | None = None,
) -> PrequentialTrace:
    """Score each case with the current posterior means, then update."""
    for r in rules:
        get_rule(r)
    prior = as_forecasts(cells)
    state = dict(cells)
    cumulative = {r: 0.0 for r in rules}
    skipped: dict[CellKey, int] = {}
    rejected: list[str] = []
    entries = []
    for case in _checked_cases(cases, cells, table, strict, rejected):
        current = {k: Forecast(state[k].responses, posterior_mean(state[k]))
                   for k in ((case.disease, q) for q in case.answers)}
        obs = observations(current, case)
        scores = []
        for rule in rules:
            for ob in obs:
                s = evaluate(rule, ob.probs, ob.outcome, log_floor)
                scores.append(ScoreRecord(ob.case_id, ob.disease, ob.question, rule, s))
                cumulative[rule] += s
        rel = tuple(
            ReliabilityPoint(ob.disease, ob.question,
                             reliability_stat(prior[(ob.disease, ob.question)].probs, ob.outcome))
            for ob in obs
        )
        before = dict(skipped)
        _learn(state, case, skipped)
        keys = tuple((case.disease, q) for q in case.answers)
        skip_keys = tuple(k for k in keys if skipped.get(k, 0) != before.get(k, 0))
        entries.append(TraceEntry(
            case.case_id, tuple(scores), dict(cumulative), rel,
            tuple(k for k in keys if k not in skip_keys), skip_keys,
        ))
    return PrequentialTrace(tuple(rules), entries, state, cumulative, skipped, rejected)


@dataclass(frozen=True)
class Flag:
    disease: str
    question: str
    cases: int
    mean_r: float

    @property
    def direction(self) -> str:
        return "over-confident" if self.mean_r > 0 else "diffident"


def flag_unreliable(
    trace: PrequentialTrace, min_cases: int = 10, threshold: float = 0.1
) -> list[Flag]:
    """Cells whose mean reliability statistic against the prior exceeds
    ``threshold`` in absolute value after at least ``min_cases`` cases.

    This is a heuristic monitor, not a calibrated test.
    """
    if min_cases < 1:
        raise ValueError("min_cases must be >= 1")
    rs: dict[CellKey, list[float]] = defaultdict(list)
    for entry in trace.entries:
        for pt in entry.prior_reliability:
            rs[(pt.disease, pt.question)].append(pt.r)
    flags = []
    for (d, q), vals in rs.items():
        if len(vals) < min_cases:
            continue
        mean_r = math.fsum(vals) / len(vals)
        if abs(mean_r) > threshold:
            flags.append(Flag(d, q, len(vals), mean_r))
    return flags
