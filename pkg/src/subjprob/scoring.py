"""Scoring rules for probability forecasts over a question's responses.

Scores are penalties: lower is better. The Brier score here carries the
factor 1/2 so that it ranges over [0, 1].
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from subjprob.model import CaseRecord, CellKey, check_outcome_vector

LOG_BASE = "e"


class Forecast(NamedTuple):
    """A point probability vector aligned with response labels."""

    responses: tuple[str, ...]
    probs: tuple[float, ...]

    def index(self, response: str) -> int:
        try:
            return self.responses.index(response)
        except ValueError:
            raise KeyError(f"unknown response label {response!r}") from None


def _observed(p: Sequence[float], e: Sequence[int]) -> int:
    if len(p) != len(e):
        raise ValueError(f"length mismatch: {len(p)} probabilities, {len(e)} outcomes")
    return check_outcome_vector(e)


def brier(p: Sequence[float], e: Sequence[int]) -> float:
    """Half the squared distance between forecast and outcome indicator."""
    _observed(p, e)
    return 0.5 * math.fsum((ei - pi) ** 2 for pi, ei in zip(p, e))


def log_score(p: Sequence[float], e: Sequence[int], floor: float | None = None) -> float:
    """Negative natural log of the probability given to the observed response.

    Returns ``math.inf`` when that probability is zero and no floor is set.
    """
    r = _observed(p, e)
    if floor is not None and floor < 0:
        raise ValueError(f"log floor must be >= 0, got {floor}")
    pr = p[r] if floor is None else max(p[r], floor)
    if pr <= 0:
        return math.inf
    return -math.log(pr)


def abs_dev_score(p: Sequence[float], e: Sequence[int]) -> float:
    """Sum of absolute deviations. Not a proper scoring rule."""
    _observed(p, e)
    return math.fsum(abs(ei - pi) for pi, ei in zip(p, e))


RULES: dict[str, Callable[..., float]] = {
    "brier": brier,
    "log": log_score,
    "absdev": abs_dev_score,
}
IMPROPER_RULES = frozenset({"absdev"})


def get_rule(name: str) -> Callable[..., float]:
    try:
        return RULES[name]
    except KeyError:
        raise KeyError(f"unknown scoring rule {name!r}, try: {', '.join(RULES)}") from None


def evaluate(rule: str, p: Sequence[float], e: Sequence[int], log_floor: float | None = None) -> float:
    fn = get_rule(rule)
    if rule == "log":
        return fn(p, e, floor=log_floor)
    return fn(p, e)


@dataclass(frozen=True)
class ScoreRecord:
    case_id: str
    disease: str
    question: str
    rule: str
    score: float

    @property
    def improper(self) -> bool:
        return self.rule in IMPROPER_RULES


class Observation(NamedTuple):
    """One answered question of one case, paired with the forecast it faced."""

    case_id: str
    disease: str
    question: str
    probs: tuple[float, ...]
    observed: int

    @property
    def outcome(self) -> tuple[int, ...]:
        return tuple(int(i == self.observed) for i in range(len(self.probs)))


def observations(
    forecasts: Mapping[CellKey, Forecast], case: CaseRecord
) -> list[Observation]:
    """Pair each answered question of ``case`` with its forecast.

    Raises ``KeyError`` for an unknown disease, question or response label.
    """
    if not any(d == case.disease for d, _ in forecasts):
        raise KeyError(f"case {case.case_id!r}: no forecasts for disease {case.disease!r}")
    out = []
    for qid, resp in case.answers.items():
        try:
            fc = forecasts[(case.disease, qid)]
        except KeyError:
            raise KeyError(f"case {case.case_id!r}: unknown question {qid!r}") from None
        try:
            j = fc.index(resp)
        except KeyError:
            raise KeyError(
                f"case {case.case_id!r}: response {resp!r} is not a valid answer "
                f"to question {qid!r}"
            ) from None
        out.append(Observation(case.case_id, case.disease, qid, fc.probs, j))
    return out


def score_case(
    forecasts: Mapping[CellKey, Forecast],
    case: CaseRecord,
    rule: str = "brier",
    log_floor: float | None = None,
) -> list[ScoreRecord]:
    """One score per answered question; unanswered questions are skipped."""
    get_rule(rule)
    return [
        ScoreRecord(ob.case_id, ob.disease, ob.question, rule,
                    evaluate(rule, ob.probs, ob.outcome, log_floor))
        for ob in observations(forecasts, case)
    ]


class GroupMean(NamedTuple):
    count: int
    mean: float


def aggregate(records: Iterable[ScoreRecord], by: str = "overall") -> dict[str, GroupMean]:
    """Mean score per disease, per question, or over everything.

    ``by`` is one of ``"disease"``, ``"question"`` or ``"overall"``; the
    overall group is keyed ``"overall"``. Groups appear in first-seen order.
    """
    keyfuncs = {
        "disease": lambda r: r.disease,
        "question": lambda r: r.question,
        "overall": lambda r: "overall",
    }
    if by not in keyfuncs:
        raise ValueError(f"unknown group key {by!r}")
    key = keyfuncs[by]
    groups: dict[str, list[float]] = defaultdict(list)
    rules = set()
    for r in records:
        rules.add(r.rule)
        groups[key(r)].append(r.score)
    if len(rules) > 1:
        raise ValueError(f"cannot aggregate mixed rules: {sorted(rules)}")
    return {g: GroupMean(len(s), math.fsum(s) / len(s)) for g, s in groups.items()}
