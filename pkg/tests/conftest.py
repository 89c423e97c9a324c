from pathlib import Path

import pytest

from subjprob.ingestion import parse_assessments, parse_cases

DATA = Path(__file__).parent / "data"

AS = "Aortic stenosis"
HLH = "Hypoplastic left heart"
NUHD = "Non-urgent heart disease"
MAIN = "Main problem?"
GRUNT = "Grunting?"

# aortic stenosis 'main problem?' midpoints rescaled and rounded as printed
PAPER_P = (0.0, 0.954, 0.046, 0.0, 0.0)
MURMUR = (0, 0, 1, 0, 0)


@pytest.fixture(scope="session")
def table():
    return parse_assessments((DATA / "table1.csv").read_bytes(), "table1.csv")


@pytest.fixture(scope="session")
def cases():
    return parse_cases((DATA / "table2_cases.csv").read_bytes(), "table2_cases.csv")


@pytest.fixture
def as_cases(cases):
    return [c for c in cases if c.disease == AS]


_acceptance: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _acceptance.append((marker.args[0], "PASS" if rep.passed else "FAIL"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(text): acceptance criterion description")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for text, status in _acceptance:
        terminalreporter.write_line(f"{status}  {text}")
