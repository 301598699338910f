import numpy as np
import pytest

from confcov.geometry import Grid

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return Grid.cube(3, 16)


@pytest.fixture(scope="session")
def grid24():
    return Grid.cube(3, 24)
