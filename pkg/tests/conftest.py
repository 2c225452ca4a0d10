import numpy as np
import pytest

from ptlab.lattice import LatticeSet, ball_set


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def disk():
    return ball_set(np.array([0.025, 0.025]), 0.3, 1 / 40, 2)


def cells2d(*cells, h=1.0):
    return LatticeSet.from_cells(list(cells), h, 2)
