"""Command-line front end.

Exit codes: 0 success, 1 I/O or format error, 2 case validation failure in
``--strict`` mode, 64 usage error. Output is deterministic: stable ordering
and numbers fixed at 6 decimals, rounded half-even.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Sequence

from subjprob import adaptation, calibration, elicitation, ingestion, scoring
from subjprob.model import AssessmentTable, CaseRecord, CellKey, DirichletCell, validate_case

log = logging.getLogger("subjprob")

EXIT_OK, EXIT_IO, EXIT_STRICT, EXIT_USAGE = 0, 1, 2, 64
_SIX = Decimal("0.000001")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float | None) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    d = Decimal(x).quantize(_SIX, rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)
    return f"{d:f}"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--assessments", metavar="PATH", type=Path)
    common.add_argument("--cases", metavar="PATH", type=Path)
    common.add_argument("--state", metavar="PATH", type=Path,
                        help="prior state file (instead of converting --assessments)")
    common.add_argument("--zero-widen-pct", metavar="W", type=float, default=0.0)
    common.add_argument("--max-n", metavar="N", type=float, default=1000.0)
    common.add_argument("--log-floor", metavar="E", type=float, default=None)
    common.add_argument("--strict", action="store_true",
                        help="abort on the first invalid case instead of skipping it")
    common.add_argument("--out", metavar="PATH", type=Path, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="subjprob", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("score", parents=[common], help="score forecasts against cases")
    s.add_argument("--rule", default="brier", choices=sorted(scoring.RULES))
    s.add_argument("--group-by", default="overall", choices=["disease", "question", "overall"])

    s = sub.add_parser("decompose", parents=[common],
                       help="mean discrimination and reliability per group")
    s.add_argument("--group-by", default="disease", choices=["disease", "question"])

    s = sub.add_parser("bins", parents=[common], help="reliability diagram bin table")
    s.add_argument("--bins", default="paper12", metavar="SCHEME",
                   help="'paper12' or comma-separated edges from 0 to 1")

    sub.add_parser("convert", parents=[common], help="intervals to implicit-sample state")
    sub.add_parser("adapt", parents=[common], help="combine prior state with case data")

    s = sub.add_parser("prequential", parents=[common],
                       help="score-then-update replay of cases in file order")
    s.add_argument("--rule", default="brier,log",
                   help="comma-separated rules from: " + ", ".join(scoring.RULES))
    s.add_argument("--state-out", metavar="PATH", type=Path, help="write the final state here")
    s.add_argument("--flag-min-cases", metavar="M", type=int, default=10)
    s.add_argument("--flag-threshold", metavar="T", type=float, default=0.1)
    return p


def _policy(args) -> elicitation.ElicitationPolicy:
    try:
        return elicitation.ElicitationPolicy(zero_widen_pct=args.zero_widen_pct, max_n=args.max_n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_args(args) -> None:
    if args.log_floor is not None and not (args.log_floor >= 0):
        raise UsageError("--log-floor must be >= 0")
    if args.command == "prequential":
        if args.flag_min_cases < 1:
            raise UsageError("--flag-min-cases must be >= 1")
        if not args.flag_threshold >= 0:
            raise UsageError("--flag-threshold must be >= 0")
        for r in _rules(args):
            if r not in scoring.RULES:
                raise UsageError(f"unknown rule {r!r}")


def _rules(args) -> list[str]:
    return [r.strip() for r in args.rule.split(",") if r.strip()]


def _read(path: Path) -> bytes:
    return path.read_bytes()


def _load_table(args) -> AssessmentTable:
    if args.assessments is None:
        raise UsageError("--assessments is required")
    return ingestion.parse_assessments(_read(args.assessments), str(args.assessments))


def _load_cases(args) -> list[CaseRecord]:
    if args.cases is None:
        raise UsageError("--cases is required")
    return ingestion.parse_cases(_read(args.cases), str(args.cases))


def _load_prior(args) -> tuple[dict[CellKey, DirichletCell], AssessmentTable | None,
                               elicitation.ElicitationPolicy | None]:
    if args.state is not None:
        cells, policy = ingestion.read_state(_read(args.state), str(args.state))
        return cells, None, policy
    table = _load_table(args)
    policy = _policy(args)
    return elicitation.build_cells(table, policy), table, policy


def _forecasts(args):
    """Point forecasts: rescaled midpoints, or posterior means of a state file."""
    if args.state is not None and args.assessments is None:
        cells, _ = ingestion.read_state(_read(args.state), str(args.state))
        return adaptation.as_forecasts(cells), None
    table = _load_table(args)
    return elicitation.point_forecasts(table, _policy(args)), table


def _valid_cases(cases, forecasts, table, strict):
    for case in cases:
        if table is not None:
            problems = validate_case(case, table)
        else:
            problems = adaptation.case_problems(case, forecasts)
        if problems:
            if strict:
                raise adaptation.CaseValidationError(problems)
            for p in problems:
                log.warning("skipping case: %s", p)
            continue
        yield case


def _observations(args):
    forecasts, table = _forecasts(args)
    cases = _load_cases(args)
    obs = []
    for case in _valid_cases(cases, forecasts, table, args.strict):
        obs.extend(scoring.observations(forecasts, case))
    return obs


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8", newline="")


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def cmd_score(args) -> int:
    forecasts, table = _forecasts(args)
    cases = _load_cases(args)
    records = []
    for case in _valid_cases(cases, forecasts, table, args.strict):
        records.extend(scoring.score_case(forecasts, case, args.rule, args.log_floor))
    for r in records:
        if math.isinf(r.score):
            log.warning("infinite score encountered at (%s, %s)", r.case_id, r.question)

    improper = "true" if args.rule in scoring.IMPROPER_RULES else "false"
    head = f"# rule={args.rule} log_base={scoring.LOG_BASE} improper_rule={improper} group_by={args.group_by}\n"
    rows = [["kind", "case_id", "disease", "question", "group", "count", "score"]]
    rows += [["record", r.case_id, r.disease, r.question, "", 1, fmt(r.score)] for r in records]
    if records:
        groups = scoring.aggregate(records, args.group_by)
        kind = "overall" if args.group_by == "overall" else "group"
        rows += [[kind, "", "", "", g, m.count, fmt(m.mean)] for g, m in groups.items()]
        if args.group_by != "overall":
            m = scoring.aggregate(records, "overall")["overall"]
            rows.append(["overall", "", "", "", "overall", m.count, fmt(m.mean)])
    _emit(args, head + _csv(rows))
    return EXIT_OK


def cmd_decompose(args) -> int:
    obs = _observations(args)
    report = calibration.decomposition_report(obs, args.group_by)
    rows = [["group", "discrimination", "reliability", "count"]]
    rows += [[r.group, fmt(r.discrimination), fmt(r.reliability), r.count] for r in report]
    _emit(args, _csv(rows))
    return EXIT_OK


def cmd_bins(args) -> int:
    try:
        calibration.resolve_scheme(args.bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    obs = _observations(args)
    table = calibration.reliability_bins(calibration.reliability_pairs(obs), args.bins)
    _emit(args, format_bins(table))
    return EXIT_OK


def format_bins(table: calibration.ReliabilityBinTable) -> str:
    rows = [["bin", "lower", "upper", "n", "occurred", "frequency", "mean_probability"]]
    for r in table.rows:
        rows.append([r.bin.label, fmt(r.bin.lower), fmt(r.bin.upper), r.n, r.occurred,
                     fmt(r.frequency), fmt(r.mean_prob)])
    return _csv(rows)


def _report_degenerate(cells) -> None:
    degenerate = [k for k, c in cells.items() if c.degenerate]
    log.info("%d cells, %d degenerate", len(cells), len(degenerate))
    for d, q in degenerate:
        log.info("degenerate cell: (%s, %s)", d, q)


def cmd_convert(args) -> int:
    table = _load_table(args)
    policy = _policy(args)
    cells = elicitation.build_cells(table, policy)
    _report_degenerate(cells)
    _emit(args, ingestion.write_state(cells, policy))
    return EXIT_OK


def cmd_adapt(args) -> int:
    cells, table, policy = _load_prior(args)
    cases = _load_cases(args)
    result = adaptation.batch_adapt(cells, cases, table, strict=args.strict)
    _report_degenerate(result.cells)
    for (d, q), n in result.skipped_updates.items():
        log.info("degenerate cell (%s, %s) ignored %d observations", d, q, n)
    _emit(args, ingestion.write_state(result.cells, policy))
    return EXIT_OK


def cmd_prequential(args) -> int:
    cells, table, policy = _load_prior(args)
    cases = _load_cases(args)
    trace = adaptation.prequential_replay(
        cells, cases, _rules(args), table, strict=args.strict, log_floor=args.log_floor
    )
    rows = [["case_id", "disease", "question", "rule", "score", "cumulative"]]
    running = {r: 0.0 for r in trace.rules}
    for entry in trace.entries:
        for s in entry.scores:
            running[s.rule] += s.score
            rows.append([s.case_id, s.disease, s.question, s.rule, fmt(s.score),
                         fmt(running[s.rule])])
    _emit(args, _csv(rows))
    if args.state_out is not None:
        args.state_out.write_text(ingestion.write_state(trace.cells, policy),
                                  encoding="utf-8", newline="")

    for rule, total in trace.cumulative.items():
        log.info("cumulative %s score: %s", rule, fmt(total))
    for (d, q), n in trace.skipped_updates.items():
        log.info("degenerate cell (%s, %s) ignored %d observations", d, q, n)
    flags = adaptation.flag_unreliable(trace, args.flag_min_cases, args.flag_threshold)
    for f in flags:
        log.warning("flagged (%s, %s): mean R against prior %s over %d cases, %s "
                    "[heuristic R-based monitor]", f.disease, f.question, fmt(f.mean_r),
                    f.cases, f.direction)
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "decompose": cmd_decompose,
    "bins": cmd_bins,
    "convert": cmd_convert,
    "adapt": cmd_adapt,
    "prequential": cmd_prequential,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        _check_args(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"subjprob: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except adaptation.CaseValidationError as exc:
        print(f"subjprob: invalid case: {exc}", file=sys.stderr)
        return EXIT_STRICT
    except ingestion.FormatError as exc:
        print(f"subjprob: format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"subjprob: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"subjprob: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
