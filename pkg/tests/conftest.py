from pathlib import Path

import numpy as np
import pytest

from bermudan.oracle import load_chain

DATA = Path(__file__).parent / "data"


class TablePayoff:
    """Payoff whose value at time t is ``table[t]`` regardless of the state."""

    def __init__(self, table, bound=None):
        self.table = np.asarray(table, dtype=float)
        self.bound = float(bound if bound is not None else np.abs(self.table).max())

    def discounted(self, t, xs):
        return np.full(np.asarray(xs).shape[0], self.table[t])


def const(c):
    return lambda xs: np.full(np.asarray(xs).shape[0], float(c))


@pytest.fixture(scope="session")
def random_chains():
    return [load_chain(p) for p in sorted(DATA.glob("chain_random_*.txt"))]


@pytest.fixture(scope="session")
def two_state_chain():
    return load_chain(DATA / "chain_two_state.txt")


_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.get_closest_marker("acceptance"):
        detail = getattr(item, "acceptance_detail", "")
        _acceptance.append((item.name, rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}  {detail}")
