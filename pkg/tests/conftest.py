import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from flowsched.core import Instance, Order  # noqa: E402


@pytest.fixture
def derived():
    """2 machines, 3 tasks; under (0, 1, 2): C = [[2, 3, 5], [4, 7, 8]]."""
    return Instance([[2, 1, 2], [2, 3, 1]],
                    [Order("A", 6.0, 0.5, (0, 1)), Order("B", 6.0, 0.5, (2,))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
