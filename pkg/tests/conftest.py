from __future__ import annotations

import numpy as np
import pytest

from eslab.ensemble import GaussianDensity, grid_from_gaussian
from eslab.landscape import Potential


@pytest.fixture
def ou():
    return Potential.quadratic(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def std_grid():
    return grid_from_gaussian(GaussianDensity([0.0], [[1.0]]), [(-8, 8)], [2048])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
