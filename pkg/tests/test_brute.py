import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from ptlab.brute import brute_force_cost, small_sets_1d, small_sets_2d
from ptlab.lattice import LatticeSet


def test_single_cell():
    assert brute_force_cost(LatticeSet.from_cells([(0, 0)], 1, 2), 1) == 1.0
    assert brute_force_cost(LatticeSet.from_cells([(0,)], 1, 1), 2) == 1.0


def test_interval_by_hand():
    # n cells in a row ship half left and half right: sum of (k+1) per side
    E = LatticeSet.from_cells([(i,) for i in range(4)], 1, 1)
    assert brute_force_cost(E, 1) == 2 * (2 + 2)


def _lsa_over_window(E, p, pad):
    """Assignment over every free cell of a padded box, solved by scipy."""
    cells = E.cells()
    lo, hi = cells.min(0) - pad, cells.max(0) + pad
    grid = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij"), -1).reshape(-1, E.dim)
    occupied = {tuple(c) for c in cells}
    free = np.array([g for g in grid if tuple(g) not in occupied])
    C = np.sqrt(((cells[:, None, :] - free[None, :, :]) ** 2).sum(-1)) ** p
    r, c = linear_sum_assignment(C)
    return C[r, c].sum()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=6, unique=True),
       st.sampled_from([1.0, 2.0, 1.5]))
def test_matches_dense_assignment(cells, p):
    E = LatticeSet.from_cells(cells, 1, 2)
    assert brute_force_cost(E, p) == pytest.approx(_lsa_over_window(E, p, 12), rel=1e-12)


def test_enumeration_counts():
    # translation classes of subsets of a 6-cell line, up to reflection
    sets = list(small_sets_1d(6, 6))
    assert len(sets) == len(set(sets))
    assert sets[0] == (0,)
    assert (0, 1) in sets and (0, 2) in sets
    assert all(tuple(sorted(s[-1] - c for c in s)) >= s for s in sets)
    two = [s for s in small_sets_2d(3, 2) if len(s) == 2]
    # pairs in a 3x3 box up to symmetry: offsets (0,1),(0,2),(1,1),(1,2),(2,2)
    assert len(two) == 5
