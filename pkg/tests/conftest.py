from pathlib import Path

import pytest

from liainv.formula import parse_formula
from liainv.minsky import parse_machine
from liainv.smt import solver_available
from liainv.systems import PRODUCT_VARS

FIXTURES = Path(__file__).parent / "fixtures"
MACHINES = FIXTURES / "machines"
CANDIDATES = FIXTURES / "candidates"

HALTING = {"halt": 0, "two_inc": 2, "countdown": 9}
DIVERGING = ("loop", "ping")

ACCEPTANCE_LINES: list = []

needs_solver = pytest.mark.skipif(not solver_available(), reason="no SMT solver on PATH (pip install z3-solver)")


def load_machine(name):
    return parse_machine((MACHINES / f"{name}.mm").read_text(), name=name)


def candidate_corpus():
    return {p.stem: parse_formula(p.read_text().strip(), PRODUCT_VARS)
            for p in sorted(CANDIDATES.glob("*.inv"))}


@pytest.fixture(scope="session")
def machines():
    return {p.stem: load_machine(p.stem) for p in MACHINES.glob("*.mm")}


@pytest.fixture(scope="session")
def loop_machine():
    return load_machine("loop")


@pytest.fixture(scope="session")
def corpus():
    return candidate_corpus()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
