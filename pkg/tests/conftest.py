import numpy as np
import pytest

from gprice import CylinderPayoff, UncertaintySet

THETA = UncertaintySet.interval(0.04, 0.09)


def payoff(f, times=(1.0,), name=""):
    return CylinderPayoff(tuple(times), f, name=name)


@pytest.fixture
def theta():
    return THETA


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# (criterion number, line) pairs filled in by test_acceptance
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
