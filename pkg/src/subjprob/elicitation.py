"""Interval judgements to point forecasts and implicit Dirichlet samples.

An interval is read as a one-standard-error binomial interval: a range with
midpoint m and half-width h is what one would report after seeing
n = m(1 - m) / h^2 cases. With several responses the smallest such n wins,
i.e. the most imprecise judgement fixes the size of the implicit sample.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple, Sequence

from subjprob.model import AssessmentTable, CellKey, DirichletCell, IntervalAssessment
from subjprob.scoring import Forecast


class AllZeroMidpointsError(ValueError):
    def __init__(self, where: object = None):
        self.where = where
        msg = "every interval midpoint is zero; no forecast can be formed"
        if where is not None:
            msg += f" at {where}"
        super().__init__(msg)


@dataclass(frozen=True)
class ElicitationPolicy:
    """How interval judgements become implicit samples.

    zero_widen_pct: 0-0% intervals become 0-w% (and 100-100% become
        (100-w)-100%). 4 reflects an observed 2% error rate on "impossible"
        findings; the default 0 leaves judgements untouched.
    max_n: implicit sample size used for degenerate cells, whose size is
        strictly infinite.
    n_decimals: decimals kept when rounding the implicit sample size
        before it is spread over responses. ``None`` disables rounding.
    """

    zero_widen_pct: float = 0.0
    max_n: float = 1000.0
    n_decimals: int | None = 0
    one_standard_error: bool = True

    def __post_init__(self):
        if not 0 <= self.zero_widen_pct <= 50:
            raise ValueError(f"zero_widen_pct must be in [0, 50], got {self.zero_widen_pct}")
        if not (self.max_n > 0 and math.isfinite(self.max_n)):
            raise ValueError(f"max_n must be positive and finite, got {self.max_n}")
        if self.n_decimals is not None and self.n_decimals < 0:
            raise ValueError("n_decimals must be >= 0")
        if not self.one_standard_error:
            raise ValueError("only the one-standard-error interpretation is supported")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_POLICY = ElicitationPolicy()


def midpoints(cell: Sequence[IntervalAssessment]) -> list[float]:
    return [iv.midpoint for iv in cell]


def rescale(mids: Sequence[float], where: object = None) -> tuple[float, ...]:
    """Divide midpoints by their sum so they form a probability vector."""
    total = math.fsum(mids)
    if total <= 0:
        raise AllZeroMidpointsError(where)
    return tuple(m / total for m in mids)


def widen_zeros(
    cell: Sequence[IntervalAssessment], policy: ElicitationPolicy = DEFAULT_POLICY
) -> tuple[IntervalAssessment, ...]:
    w = policy.zero_widen_pct
    if w == 0:
        return tuple(cell)
    out = []
    for iv in cell:
        if iv.lo == 0 and iv.hi == 0:
            iv = IntervalAssessment(0.0, w)
        elif iv.lo == 100 and iv.hi == 100:
            iv = IntervalAssessment(100.0 - w, 100.0)
        out.append(iv)
    return tuple(out)


def point_forecast(
    cell: Sequence[IntervalAssessment],
    policy: ElicitationPolicy = DEFAULT_POLICY,
    where: object = None,
) -> tuple[float, ...]:
    return rescale(midpoints(widen_zeros(cell, policy)), where)


class ImplicitSampleSize(NamedTuple):
    n: float
    degenerate: bool
    raw: float


def _round(x: float, decimals: int | None) -> float:
    if decimals is None:
        return x
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def implicit_sample_size(
    cell: Sequence[IntervalAssessment], policy: ElicitationPolicy = DEFAULT_POLICY
) -> ImplicitSampleSize:
    """Smallest per-response n over intervals that carry any imprecision.

    ``cell`` is used as given; apply :func:`widen_zeros` first if wanted.
    Candidates use unrescaled midpoints. Zero-width intervals and midpoints
    of exactly 0 or 1 express certainty and give no candidate. With no
    candidates at all the cell is degenerate and ``policy.max_n`` is used.
    """
    candidates = [
        iv.midpoint * (1.0 - iv.midpoint) / iv.half_range ** 2
        for iv in cell
        if iv.half_range > 0 and 0.0 < iv.midpoint < 1.0
    ]
    if not candidates:
        return ImplicitSampleSize(float(policy.max_n), True, math.inf)
    raw = min(candidates)
    return ImplicitSampleSize(_round(raw, policy.n_decimals), False, raw)


def to_dirichlet(
    cell: Sequence[IntervalAssessment],
    responses: Sequence[str],
    policy: ElicitationPolicy = DEFAULT_POLICY,
    where: object = None,
) -> DirichletCell:
    widened = widen_zeros(cell, policy)
    p = rescale(midpoints(widened), where)
    size = implicit_sample_size(widened, policy)
    return DirichletCell(tuple(responses), tuple(size.n * x for x in p), size.degenerate)


def point_forecasts(
    table: AssessmentTable, policy: ElicitationPolicy = DEFAULT_POLICY
) -> dict[CellKey, Forecast]:
    """Rescaled midpoint forecast for every (disease, question) cell."""
    out = {}
    for d, qid in table.keys():
        q = table.question(qid)
        out[(d, qid)] = Forecast(q.responses, point_forecast(table.cell(d, qid), policy, (d, qid)))
    return out


def build_cells(
    table: AssessmentTable, policy: ElicitationPolicy = DEFAULT_POLICY
) -> dict[CellKey, DirichletCell]:
    out = {}
    for d, qid in table.keys():
        q = table.question(qid)
        out[(d, qid)] = to_dirichlet(table.cell(d, qid), q.responses, policy, (d, qid))
    return out
