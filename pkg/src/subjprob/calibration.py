"""Discrimination/reliability decomposition and reliability-diagram bins.

For a single forecast ``p`` and observed response ``r`` the Brier score
splits exactly as ``B = E0 + R`` where ``E0 = (1 - sum p_i^2) / 2`` is the
score expected if the forecast were perfectly reliable, and
``R = sum p_i^2 - p_r`` measures the departure from it. A positive mean R
signals over-confidence and a negative one diffidence.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from subjprob.scoring import Observation, _observed

# tolerance used when assigning a probability to a bin edge
EDGE_TOL = 1e-12


def expected_brier_under_reliability(p: Sequence[float]) -> float:
    return 0.5 * (1.0 - math.fsum(x * x for x in p))


def reliability_stat(p: Sequence[float], e: Sequence[int]) -> float:
    r = _observed(p, e)
    return math.fsum(x * x for x in p) - p[r]


@dataclass(frozen=True)
class DecompositionRecord:
    group: str
    discrimination: float
    reliability: float
    count: int


def decomposition_report(
    obs: Iterable[Observation], by: str = "disease"
) -> list[DecompositionRecord]:
    """Count-weighted mean E0 and R per disease or per question."""
    if by not in ("disease", "question"):
        raise ValueError(f"unknown group key {by!r}")
    e0s: dict[str, list[float]] = defaultdict(list)
    rs: dict[str, list[float]] = defaultdict(list)
    for ob in obs:
        g = ob.disease if by == "disease" else ob.question
        e0s[g].append(expected_brier_under_reliability(ob.probs))
        rs[g].append(reliability_stat(ob.probs, ob.outcome))
    if not e0s:
        raise ValueError("no scored observations to decompose")
    return [
        DecompositionRecord(g, math.fsum(e0s[g]) / len(e0s[g]),
                            math.fsum(rs[g]) / len(rs[g]), len(e0s[g]))
        for g in e0s
    ]


@dataclass(frozen=True)
class Bin:
    """Probability bin. ``lower``/``upper`` are inclusive as flagged."""

    label: str
    lower: float
    upper: float
    lower_closed: bool
    upper_closed: bool

    def contains(self, p: float) -> bool:
        above = p >= self.lower - EDGE_TOL if self.lower_closed else p > self.lower + EDGE_TOL
        below = p <= self.upper + EDGE_TOL if self.upper_closed else p < self.upper - EDGE_TOL
        return above and below


def paper_bins() -> list[Bin]:
    """Twelve groups: 0, 1-10%, 11-20%, ..., 81-90%, 91-99%, 100%."""
    bins = [Bin("0%", 0.0, 0.0, True, True)]
    for i in range(9):
        lo, hi = i / 10, (i + 1) / 10
        bins.append(Bin(f"{10 * i + 1}-{10 * (i + 1)}%", lo, hi, False, True))
    bins.append(Bin("91-99%", 0.9, 1.0, False, False))
    bins.append(Bin("100%", 1.0, 1.0, True, True))
    return bins


def edge_bins(edges: Sequence[float]) -> list[Bin]:
    """Bins ``[e0, e1], (e1, e2], ..., (e_{m-1}, e_m]`` covering [0, 1]."""
    edges = [float(x) for x in edges]
    if len(edges) < 2:
        raise ValueError("a bin scheme needs at least two edges")
    if edges[0] != 0.0 or edges[-1] != 1.0:
        raise ValueError(f"bin edges must start at 0 and end at 1, got {edges}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")
    return [
        Bin(f"{a:g}-{b:g}", a, b, i == 0, True)
        for i, (a, b) in enumerate(zip(edges, edges[1:]))
    ]


def resolve_scheme(scheme: str | Sequence[float] | None) -> list[Bin]:
    """``"paper12"`` (the default) or a comma-separated / sequence of edges."""
    if scheme is None or scheme == "paper12":
        return paper_bins()
    if isinstance(scheme, str):
        try:
            edges = [float(x) for x in scheme.split(",")]
        except ValueError:
            raise ValueError(f"unknown bin scheme {scheme!r}") from None
        return edge_bins(edges)
    return edge_bins(scheme)


@dataclass(frozen=True)
class BinRow:
    bin: Bin
    n: int
    occurred: int
    prob_sum: float
    var_sum: float

    @property
    def frequency(self) -> float | None:
        return self.occurred / self.n if self.n else None

    @property
    def mean_prob(self) -> float | None:
        return self.prob_sum / self.n if self.n else None

    @property
    def std_error(self) -> float | None:
        """Binomial standard error of the frequency if the stated p were true."""
        return math.sqrt(self.var_sum) / self.n if self.n else None


@dataclass(frozen=True)
class ReliabilityBinTable:
    rows: tuple[BinRow, ...]

    @property
    def total(self) -> int:
        return sum(r.n for r in self.rows)


def reliability_pairs(obs: Iterable[Observation]) -> list[tuple[float, bool]]:
    """Every response of every scored question as (assessed p, occurred)."""
    return [(p, i == ob.observed) for ob in obs for i, p in enumerate(ob.probs)]


def reliability_bins(
    pairs: Iterable[tuple[float, bool]],
    scheme: str | Sequence[float] | None = "paper12",
) -> ReliabilityBinTable:
    bins = resolve_scheme(scheme)
    n = [0] * len(bins)
    occ = [0] * len(bins)
    psum: list[list[float]] = [[] for _ in bins]
    vsum: list[list[float]] = [[] for _ in bins]
    for p, happened in pairs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p!r} outside [0, 1]")
        for i, b in enumerate(bins):
            if b.contains(p):
                break
        else:  # pragma: no cover - schemes cover [0, 1]
            raise ValueError(f"probability {p!r} falls in no bin")
        n[i] += 1
        occ[i] += bool(happened)
        psum[i].append(p)
        vsum[i].append(p * (1.0 - p))
    return ReliabilityBinTable(tuple(
        BinRow(b, n[i], occ[i], math.fsum(psum[i]), math.fsum(vsum[i]))
        for i, b in enumerate(bins)
    ))
