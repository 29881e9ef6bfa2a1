import os

import pytest

from tabrubric.table import read_table, with_source

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
CLEAN_DIR = os.path.join(FIXTURES, "clean")
EXAMPLE_GT = os.path.join(FIXTURES, "worked_example", "gt.csv")
EXAMPLE_CAND = os.path.join(FIXTURES, "worked_example", "cand.csv")


def load_cleans():
    names = sorted(n for n in os.listdir(CLEAN_DIR) if n.endswith(".csv"))
    return [with_source(read_table(os.path.join(CLEAN_DIR, n)), n[:-4]) for n in names]


@pytest.fixture(scope="session")
def cleans():
    return load_cleans()


@pytest.fixture
def example_paths():
    return EXAMPLE_GT, EXAMPLE_CAND


ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion(capsys):
    """Record and print one PASS/FAIL line, then assert."""
    def report(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
