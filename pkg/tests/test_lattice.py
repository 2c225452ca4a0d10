import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptlab.lattice import (
    LatticeSet,
    ball_set,
    ball_volume,
    c0,
    component_count,
    connected_components,
    euclid_perimeter,
    face_count,
    face_perimeter,
    fraenkel_asymmetry,
    repair_count,
    rescale,
    translate,
    volume,
)

small_2d = st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=25, unique=True)


def test_ball_volume_closed_forms():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_c0_matches_formula():
    for d in (1, 2, 3):
        assert c0(d) == pytest.approx((3 ** (1 / d) + 2) * ball_volume(d) ** (-1 / d))


def test_single_cell_perimeter():
    h = 0.1
    for d in (1, 2, 3):
        S = LatticeSet.from_cells([[0] * d], h, d)
        assert face_perimeter(S) == pytest.approx(2 * d * h ** (d - 1))
        assert volume(S) == pytest.approx(h ** d)


def test_square_perimeter_is_exact():
    S = LatticeSet(np.ones((5, 3), bool), 0.5)
    assert face_count(S) == 16
    assert face_perimeter(S) == pytest.approx(8.0)


def test_set_algebra():
    A = LatticeSet.from_cells([(0, 0), (0, 1)], 1, 2)
    B = LatticeSet.from_cells([(0, 1), (5, 5)], 1, 2)
    assert (A | B).count == 3
    assert (A & B).count == 1
    assert (A - B) == LatticeSet.from_cells([(0, 0)], 1, 2)


def test_incompatible_spacing_rejected():
    with pytest.raises(ValueError):
        LatticeSet.from_cells([(0, 0)], 1, 2) | LatticeSet.from_cells([(0, 0)], 0.5, 2)


@settings(max_examples=60, deadline=None)
@given(small_2d, st.integers(-20, 20), st.integers(-20, 20))
def test_translation_invariance(cells, dx, dy):
    S = LatticeSet.from_cells(cells, 0.1, 2)
    T = translate(S, (dx, dy))
    assert face_count(T) == face_count(S)
    assert component_count(T) == component_count(S)


@settings(max_examples=60, deadline=None)
@given(small_2d, small_2d)
def test_face_count_subadditive(a, b):
    A = LatticeSet.from_cells(a, 1, 2)
    B = LatticeSet.from_cells(b, 1, 2)
    assert face_count(A | B) <= face_count(A) + face_count(B)


@settings(max_examples=40, deadline=None)
@given(small_2d)
def test_integer_rescale_is_block_copy(cells):
    S = LatticeSet.from_cells(cells, 1, 2)
    L = rescale(S, 2)
    assert L.count == 4 * S.count
    assert face_count(L) == 2 * face_count(S)


def test_components_partition_the_set():
    S = LatticeSet.from_cells([(0, 0), (0, 1), (3, 3), (5, 0)], 1, 2)
    comps = connected_components(S)
    assert len(comps) == 3
    assert sum(c.count for c in comps) == S.count


def test_diagonal_cells_are_separate_components():
    assert component_count(LatticeSet.from_cells([(0, 0), (1, 1)], 1, 2)) == 2


@pytest.mark.parametrize("target", [1, 50, 200, 260])
def test_repair_count_hits_target(disk, target):
    assert repair_count(disk, target).count == target


def test_repair_respects_forbidden(disk):
    ring = ball_set([0.025, 0.025], 0.35, 1 / 40, 2) - disk
    ring = LatticeSet.from_cells(ring.cells()[ring.cells()[:, 0] > 0], ring.spacing, 2)
    grown = repair_count(disk, disk.count + 30, forbidden=ring)
    assert (grown & ring).count == 0


def test_fraenkel_zero_for_translate(disk):
    val, shift = fraenkel_asymmetry(translate(disk, (7, -3)), disk)
    assert val == 0.0
    assert tuple(shift) == (7, -3)


def test_euclid_perimeter_of_disk_close_to_circle():
    r = 0.4
    S = ball_set([0.0, 0.0], r, 1 / 100, 2)
    assert euclid_perimeter(S) == pytest.approx(2 * math.pi * r, rel=0.01)
    # face perimeter overestimates by about 4/pi
    assert face_perimeter(S) / euclid_perimeter(S) == pytest.approx(4 / math.pi, rel=0.03)
