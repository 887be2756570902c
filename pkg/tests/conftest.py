import sys

import numpy as np
import pytest

from hierarchylab import nonlin


@pytest.fixture
def relu():
    return nonlin.relu()


@pytest.fixture
def tanh():
    return nonlin.tanh()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
