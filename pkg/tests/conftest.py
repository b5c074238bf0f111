import numpy as np
import pytest

from topoforge import latentnet

# one line per acceptance criterion, printed after the run (see test_acceptance)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return latentnet.init_params(seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
