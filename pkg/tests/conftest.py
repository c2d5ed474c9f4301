import numpy as np
import pytest

from mcdart.projector import GridSpec, ParallelGeometry, build_operator

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def op64():
    return build_operator(GridSpec(64, 64), ParallelGeometry.equidistant(32, 64))


@pytest.fixture(scope="session")
def op32():
    return build_operator(GridSpec(32, 32), ParallelGeometry.equidistant(16, 32))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
