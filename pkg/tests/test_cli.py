import csv
import io
import subprocess
import sys

from subjprob.cli import fmt, main
from subjprob.ingestion import read_state

from conftest import AS, DATA, GRUNT, MAIN

T1 = str(DATA / "table1.csv")
T2 = str(DATA / "table2_cases.csv")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_fmt():
    assert fmt(0.9093686895525561) == "0.909369"
    assert fmt(0.0000005) == "0.000000"  # binary value is just below the half
    assert fmt(2.5e-7) == "0.000000"
    assert fmt(-1e-9) == "0.000000"
    assert fmt(float("inf")) == "inf"
    assert fmt(None) == ""


def test_score_brier(capsys):
    code, out, _ = run(capsys, "score", "--assessments", T1, "--cases", T2, "--group-by", "disease")
    assert code == 0
    assert out.startswith("# rule=brier log_base=e improper_rule=false")
    recs = rows(out)
    murmur = [r for r in recs if r["case_id"] == "AS-04" and r["question"] == MAIN]
    assert len(murmur) == 1
    assert abs(float(murmur[0]["score"]) - 0.9101) < 1e-3
    groups = [r for r in recs if r["kind"] == "group"]
    assert [g["group"] for g in groups] == ["Non-urgent heart disease", AS, "Hypoplastic left heart"]
    overall = [r for r in recs if r["kind"] == "overall"]
    assert overall[0]["count"] == str(sum(1 for r in recs if r["kind"] == "record"))


def test_score_absdev_annotation(capsys):
    code, out, _ = run(capsys, "score", "--assessments", T1, "--cases", T2, "--rule", "absdev")
    assert code == 0
    assert "improper_rule=true" in out.splitlines()[0]


def test_score_log_infinite(capsys):
    code, out, err = run(capsys, "score", "--assessments", T1, "--cases", T2, "--rule", "log")
    assert code == 0
    assert "inf" in out and "infinite score encountered" in err
    code, out, _ = run(capsys, "score", "--assessments", T1, "--cases", T2, "--rule", "log",
                       "--log-floor", "0.001")
    assert "inf" not in out.split("\n", 1)[1]


def test_score_empty_cases(capsys, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("case_id,disease,question,response\n")
    code, out, _ = run(capsys, "score", "--assessments", T1, "--cases", str(empty))
    assert code == 0
    assert rows(out) == []


def test_strict_mode(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(f"case_id,disease,question,response\nX,{AS},{MAIN},Sneezing\n")
    code, _, err = run(capsys, "score", "--assessments", T1, "--cases", str(bad), "--strict")
    assert code == 2 and "Sneezing" in err
    code, out, err = run(capsys, "score", "--assessments", T1, "--cases", str(bad))
    assert code == 0 and "skipping case" in err


def test_format_and_io_errors(capsys, tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text("nope\n")
    code, _, err = run(capsys, "score", "--assessments", str(broken), "--cases", T2)
    assert code == 1 and "broken.csv:1" in err
    code, _, _ = run(capsys, "score", "--assessments", str(tmp_path / "missing.csv"), "--cases", T2)
    assert code == 1


def test_usage_errors(capsys):
    assert run(capsys, "bins", "--assessments", T1, "--cases", T2, "--bins", "0,0.5,0.4,1")[0] == 64
    assert run(capsys, "frobnicate")[0] == 64
    assert run(capsys, "score", "--rule", "spherical")[0] == 64
    assert run(capsys, "score", "--cases", T2)[0] == 64
    assert run(capsys, "convert", "--assessments", T1, "--zero-widen-pct", "70")[0] == 64
    assert run(capsys, "prequential", "--assessments", T1, "--cases", T2, "--flag-min-cases", "0")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "--help")[0] == 0


def test_decompose(capsys):
    code, out, _ = run(capsys, "decompose", "--assessments", T1, "--cases", T2, "--group-by", "question")
    assert code == 0
    recs = rows(out)
    assert [r["group"] for r in recs] == [MAIN, GRUNT]
    assert set(recs[0]) == {"group", "discrimination", "reliability", "count"}


def test_decompose_perfect(capsys, tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("disease,question,response,lo_pct,hi_pct\nD,Q,y,100,100\nD,Q,n,0,0\n")
    c = tmp_path / "c.csv"
    c.write_text("case_id,disease,question,response\n1,D,Q,y\n2,D,Q,y\n")
    code, out, _ = run(capsys, "decompose", "--assessments", str(a), "--cases", str(c))
    assert code == 0
    assert rows(out) == [{"group": "D", "discrimination": "0.000000",
                          "reliability": "0.000000", "count": "2"}]


def test_bins(capsys):
    code, out, _ = run(capsys, "bins", "--assessments", T1, "--cases", T2)
    assert code == 0
    recs = rows(out)
    assert len(recs) == 12
    # 45 cases x 5 main-problem responses + 44 x 2 grunting responses
    assert sum(int(r["n"]) for r in recs) == 45 * 5 + 44 * 2


def test_convert_adapt_table3(capsys, tmp_path):
    as_rows = [l for l in (DATA / "table1.csv").read_text().splitlines() if l.startswith(AS)]
    a = tmp_path / "as.csv"
    a.write_text("disease,question,response,lo_pct,hi_pct\n" + "\n".join(as_rows) + "\n")
    state = tmp_path / "prior.jsonl"
    assert run(capsys, "convert", "--assessments", str(a), "--out", str(state))[0] == 0
    cells, _ = read_state(state.read_text())
    assert round(cells[(AS, MAIN)].total, 1) == 69.0
    assert round(cells[(AS, GRUNT)].total, 1) == 36.0

    post = tmp_path / "post.jsonl"
    cases = tmp_path / "as_cases.csv"
    cases.write_text("case_id,disease,question,response\n" + "\n".join(
        l for l in (DATA / "table2_cases.csv").read_text().splitlines() if l.startswith("AS-")) + "\n")
    assert run(capsys, "adapt", "--state", str(state), "--cases", str(cases), "--out", str(post))[0] == 0
    cells, _ = read_state(post.read_text())
    m, g = cells[(AS, MAIN)], cells[(AS, GRUNT)]
    assert [f"{c / m.total:.3f}" for c in m.counts[:3]] == ["0.014", "0.929", "0.058"]
    assert [f"{c / g.total:.3f}" for c in g.counts] == ["0.090", "0.910"]


def test_prequential_matches_adapt_bytes(capsys, tmp_path):
    adapt_out = tmp_path / "adapt.jsonl"
    preq_state = tmp_path / "preq.jsonl"
    trace = tmp_path / "trace.csv"
    assert run(capsys, "adapt", "--assessments", T1, "--cases", T2, "--out", str(adapt_out))[0] == 0
    code, _, err = run(capsys, "prequential", "--assessments", T1, "--cases", T2,
                       "--out", str(trace), "--state-out", str(preq_state), "--rule", "brier,log")
    assert code == 0
    assert adapt_out.read_bytes() == preq_state.read_bytes()
    assert "cumulative log score" in err
    assert "degenerate cell (Non-urgent heart disease, Main problem?)" in err
    recs = list(csv.DictReader(io.StringIO(trace.read_text())))
    assert {r["rule"] for r in recs} == {"brier", "log"}
    assert recs[0]["case_id"] == "NUHD-01"


def test_prequential_flags(capsys):
    code, _, err = run(capsys, "prequential", "--assessments", T1, "--cases", T2,
                       "--flag-min-cases", "10", "--flag-threshold", "0.1")
    assert code == 0
    assert "flagged (Non-urgent heart disease, Main problem?)" in err
    assert "over-confident" in err


def test_deterministic_output(capsys):
    first = run(capsys, "score", "--assessments", T1, "--cases", T2, "--rule", "log")[1]
    second = run(capsys, "score", "--assessments", T1, "--cases", T2, "--rule", "log")[1]
    assert first == second


def test_entry_point():
    proc = subprocess.run([sys.executable, "-m", "subjprob.cli", "bins", "--assessments", T1,
                           "--cases", T2], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("bin,lower,upper")
