"""Readers and writers for the three external formats.

* assessments CSV: ``disease,question,response,lo_pct,hi_pct``
* cases CSV (long form): ``case_id,disease,question,response``
* state file: JSON lines, a header record followed by one record per cell
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from typing import IO, Iterator, Mapping

from subjprob.elicitation import ElicitationPolicy
from subjprob.model import (
    AssessmentTable,
    CaseRecord,
    CellKey,
    DirichletCell,
    IntervalAssessment,
    QuestionSchema,
    validate_table,
)

ASSESSMENT_HEADER = ["disease", "question", "response", "lo_pct", "hi_pct"]
CASE_HEADER = ["case_id", "disease", "question", "response"]
STATE_FORMAT = "subjprob-state"
STATE_VERSION = 1
TOTAL_TOL = 1e-9

_PCT = re.compile(r"\d{1,3}(\.\d{1,4})?")


class FormatError(ValueError):
    def __init__(self, message: str, line: int, file: str | None = None, column: str | None = None):
        self.message = message
        self.line = line
        self.file = file
        self.column = column
        where = f"{file or '<input>'}:{line}"
        if column:
            where += f" [{column}]"
        super().__init__(f"{where}: {message}")


def _text(source: str | bytes | IO, file: str | None) -> str:
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = source[: exc.start].count(b"\n") + 1
            raise FormatError("input is not valid UTF-8", line, file) from None
    if isinstance(source, str):
        return source
    data = source.read()
    return _text(data, file)


def _rows(text: str, header: list[str], file: str | None) -> Iterator[tuple[int, list[str]]]:
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise FormatError(f"missing or wrong header, expected {','.join(header)}", 1, file)
        for row in reader:
            if not row or row == [""]:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"expected {len(header)} fields, got {len(row)}", reader.line_num, file
                )
            yield reader.line_num, [c.strip() for c in row]
    except csv.Error as exc:
        raise FormatError(f"malformed CSV: {exc}", reader.line_num or 1, file) from None


def _label(value: str, column: str, line: int, file: str | None) -> str:
    if not value:
        raise FormatError("empty label", line, file, column)
    return value


def _pct(value: str, column: str, line: int, file: str | None) -> float:
    if not _PCT.fullmatch(value):
        raise FormatError(
            f"{value!r} is not a percentage with at most 4 decimals", line, file, column
        )
    x = float(value)
    if x > 100:
        raise FormatError(f"{value} exceeds 100", line, file, column)
    return x


def parse_assessments(source: str | bytes | IO, file: str | None = None) -> AssessmentTable:
    text = _text(source, file)
    diseases: list[str] = []
    responses: dict[str, list[str]] = {}
    values: dict[tuple[str, str, str], IntervalAssessment] = {}
    first_line: dict[CellKey, int] = {}
    seen_at: dict[tuple[str, str, str], int] = {}

    for line, row in _rows(text, ASSESSMENT_HEADER, file):
        d = _label(row[0], "disease", line, file)
        q = _label(row[1], "question", line, file)
        r = _label(row[2], "response", line, file)
        lo = _pct(row[3], "lo_pct", line, file)
        hi = _pct(row[4], "hi_pct", line, file)
        if lo > hi:
            raise FormatError(f"lo_pct {row[3]} > hi_pct {row[4]}", line, file, "lo_pct")
        triple = (d, q, r)
        if triple in seen_at:
            raise FormatError(
                f"duplicate assessment for {triple!r} (first at line {seen_at[triple]})",
                line, file,
            )
        seen_at[triple] = line
        if d not in diseases:
            diseases.append(d)
        resp = responses.setdefault(q, [])
        if r not in resp:
            resp.append(r)
        first_line.setdefault((d, q), line)
        values[triple] = IntervalAssessment(lo, hi)

    questions = [QuestionSchema(q, tuple(rs)) for q, rs in responses.items()]
    cells = {}
    for d in diseases:
        for qs in questions:
            present = [r for r in qs.responses if (d, qs.id, r) in values]
            if not present:
                continue
            if len(present) != qs.k:
                missing = [r for r in qs.responses if r not in present]
                raise FormatError(
                    f"arity mismatch for ({d!r}, {qs.id!r}): no rows for {missing}",
                    first_line[(d, qs.id)], file,
                )
            cells[(d, qs.id)] = tuple(values[(d, qs.id, r)] for r in qs.responses)

    table = AssessmentTable(tuple(diseases), tuple(questions), cells)
    problems = validate_table(table)
    if problems:
        incomplete = [d for d in diseases if any((d, qs.id) not in cells for qs in questions)]
        if incomplete:
            line = min(v for (d, _), v in first_line.items() if d == incomplete[0])
        else:
            line = min(first_line.values(), default=1)
        raise FormatError("; ".join(problems), line, file)
    return table


def write_assessments(table: AssessmentTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ASSESSMENT_HEADER)
    for d in table.diseases:
        for q in table.questions:
            for r, iv in zip(q.responses, table.cell(d, q.id)):
                w.writerow([d, q.id, r, _num(iv.lo), _num(iv.hi)])
    return buf.getvalue()


def _num(x: float) -> str:
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return s or "0"


def parse_cases(source: str | bytes | IO, file: str | None = None) -> list[CaseRecord]:
    """Group long-form rows by case id, keeping first-appearance order.

    A row with empty question and response declares a case with no answers.
    Labels are checked against a table later, not here.
    """
    text = _text(source, file)
    order: list[str] = []
    disease: dict[str, tuple[str, int]] = {}
    answers: dict[str, dict[str, tuple[str, int]]] = {}
    for line, (cid, d, q, r) in _rows(text, CASE_HEADER, file):
        cid = _label(cid, "case_id", line, file)
        d = _label(d, "disease", line, file)
        if cid not in disease:
            order.append(cid)
            disease[cid] = (d, line)
            answers[cid] = {}
        elif disease[cid][0] != d:
            raise FormatError(
                f"case {cid!r} has disease {d!r} but {disease[cid][0]!r} "
                f"at line {disease[cid][1]}",
                line, file, "disease",
            )
        if not q and not r:
            continue
        q = _label(q, "question", line, file)
        r = _label(r, "response", line, file)
        prev = answers[cid].get(q)
        if prev is not None and prev[0] != r:
            raise FormatError(
                f"case {cid!r} answers {q!r} with {r!r} here and {prev[0]!r} "
                f"at line {prev[1]}",
                line, file, "response",
            )
        answers[cid].setdefault(q, (r, line))
    return [
        CaseRecord(cid, disease[cid][0], {q: r for q, (r, _) in answers[cid].items()})
        for cid in order
    ]


def write_cases(cases: list[CaseRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CASE_HEADER)
    for c in cases:
        if not c.answers:
            w.writerow([c.case_id, c.disease, "", ""])
        for q, r in c.answers.items():
            w.writerow([c.case_id, c.disease, q, r])
    return buf.getvalue()


def write_state(
    cells: Mapping[CellKey, DirichletCell], policy: ElicitationPolicy | None = None
) -> str:
    """Serialize cells deterministically, one JSON record per line."""
    header = {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "policy": policy.to_dict() if policy is not None else None,
    }
    lines = [json.dumps(header)]
    for (d, q), cell in cells.items():
        lines.append(json.dumps({
            "disease": d,
            "question": q,
            "responses": list(cell.responses),
            "counts": list(cell.counts),
            "total": cell.total,
            "degenerate": cell.degenerate,
        }))
    return "\n".join(lines) + "\n"


def read_state(
    source: str | bytes | IO, file: str | None = None
) -> tuple[dict[CellKey, DirichletCell], ElicitationPolicy | None]:
    text = _text(source, file)
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty state file", 1, file)
    header = _json_line(lines[0], 1, file)
    if header.get("format") != STATE_FORMAT:
        raise FormatError(f"not a {STATE_FORMAT} file", 1, file)
    if header.get("version") != STATE_VERSION:
        raise FormatError(
            f"unsupported state version {header.get('version')!r}, expected {STATE_VERSION}",
            1, file,
        )
    policy = None
    if header.get("policy") is not None:
        try:
            policy = ElicitationPolicy(**header["policy"])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad policy: {exc}", 1, file) from None

    cells: dict[CellKey, DirichletCell] = {}
    for i, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        rec = _json_line(raw, i, file)
        try:
            d, q = rec["disease"], rec["question"]
            responses, counts = rec["responses"], rec["counts"]
            total, degenerate = rec["total"], rec["degenerate"]
        except KeyError as exc:
            raise FormatError(f"missing field {exc}", i, file) from None
        if not (isinstance(d, str) and isinstance(q, str) and isinstance(degenerate, bool)
                and isinstance(responses, list) and isinstance(counts, list)
                and all(isinstance(r, str) for r in responses)
                and all(_is_num(c) for c in counts) and _is_num(total)):
            raise FormatError("field of wrong type", i, file)
        if (d, q) in cells:
            raise FormatError(f"duplicate cell ({d!r}, {q!r})", i, file)
        try:
            cell = DirichletCell(tuple(responses), tuple(counts), degenerate)
        except ValueError as exc:
            raise FormatError(str(exc), i, file) from None
        if abs(cell.total - total) > TOTAL_TOL * max(1.0, abs(total)):
            raise FormatError(
                f"counts sum to {cell.total!r} but declared total is {total!r}", i, file, "total"
            )
        cells[(d, q)] = cell
    return cells, policy


def _is_num(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _json_line(raw: str, line: int, file: str | None) -> dict:
    try:
        rec = json.loads(raw)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise FormatError(f"invalid JSON: {exc}", line, file) from None
    if not isinstance(rec, dict):
        raise FormatError("record is not a JSON object", line, file)
    return rec
