import numpy as np
import pytest

from kuramoto_wave.disorder import make_law
from kuramoto_wave.spaces import default_grid


@pytest.fixture(scope="session")
def law1():
    return make_law(1, [1.0], [0.5])


@pytest.fixture(scope="session")
def law_half():
    return make_law(1, [0.5], [0.5])


@pytest.fixture(scope="session")
def law2():
    return make_law(2, [1.0, 10.0], [0.25, 0.25])


@pytest.fixture(scope="session")
def grid1(law1):
    return default_grid(law1, n_modes=32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
