import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptlab.fixtures import ball_with_satellite
from ptlab.lattice import LatticeSet, ball_set
from ptlab.reduction import (
    alpha,
    check_admissible,
    energy_T,
    lambda_to_m,
    m_to_lambda,
    total_T,
    truncation_scan,
    try_split_improvement,
)


def test_single_cell_energy():
    rep = energy_T(LatticeSet.from_cells([(0, 0)], 1, 2), 1)
    assert rep.face_perimeter == 4 and rep.w_functional == 1 and rep.total_T == 5


@pytest.mark.parametrize("p,d", [(1, 1), (1, 2), (2, 2), (1.5, 3)])
def test_lambda_roundtrip(p, d):
    assert lambda_to_m(m_to_lambda(0.37, p, d), p, d) == pytest.approx(0.37)


def test_lambda_exponent():
    assert m_to_lambda(4.0, 1, 1) == pytest.approx(16.0)


def test_degenerate_exponent_rejected():
    with pytest.raises(ValueError):
        m_to_lambda(1.0, 3.0, 3)


def test_admissibility():
    assert check_admissible(1, 2) == alpha(1, 2) == 2
    with pytest.raises(ValueError):
        check_admissible(0.5, 2)
    with pytest.raises(ValueError):
        check_admissible(4, 3)


def test_scaling_of_energy_parts():
    # P scales by l^(d-1), W by l^(1+d/p), exactly for integer block copies up to O(h)
    h = 1 / 40
    B = ball_set([0, 0], 0.2, h, 2)
    from ptlab.lattice import rescale

    L = rescale(B, 2)
    a, b = energy_T(B, 2, euclid=False), energy_T(L, 2, euclid=False)
    assert b.face_perimeter == pytest.approx(2 * a.face_perimeter)
    assert b.w_functional == pytest.approx(2 ** (1 + 2 / 2) * a.w_functional, rel=0.03)


def test_satellite_is_removed():
    G, G1, G2 = ball_with_satellite(1 / 50, 0.3, 0.02, 0.75)
    out = try_split_improvement(G, G1, G2, 1.0)
    assert out.condition_lhs == pytest.approx(0.0, abs=1e-12)
    assert out.condition_holds and out.accepted
    assert total_T(out.improved, 1.0) == pytest.approx(out.t_after, abs=1e-10)
    assert out.t_after < out.t_before
    assert out.improved.count == G.count


def test_half_ball_not_improved():
    G = ball_set([0, 0], 0.3, 1 / 40, 2)
    cells = G.cells()
    G1 = LatticeSet.from_cells(cells[cells[:, 0] < 0], G.spacing, 2)
    G2 = G - G1
    out = try_split_improvement(G, G1, G2, 1.0)
    assert out.improved is None and not out.accepted
    assert out.gamma > 0.05


def test_bad_partition_rejected():
    G, G1, G2 = ball_with_satellite(1 / 50, 0.3, 0.02, 0.75)
    with pytest.raises(ValueError):
        try_split_improvement(G, G1, G1, 1.0)


def test_large_volume_rejected():
    G, G1, G2 = ball_with_satellite(1 / 20, 0.7, 0.02, 1.2)
    with pytest.raises(ValueError):
        try_split_improvement(G, G1, G2, 1.0)


def test_scan_on_ball_is_contained():
    rep = truncation_scan(ball_set([0, 0], 0.3, 1 / 40, 2), 1.0)
    assert rep.verdict == "contained"
    assert rep.improvement is None


def test_scan_finds_satellite():
    G, _, _ = ball_with_satellite(1 / 50, 0.3, 0.02, 0.75)
    rep = truncation_scan(G, 1.0)
    assert rep.verdict == "case1"
    assert rep.improvement.accepted
    csv = rep.to_csv().splitlines()
    assert csv[0] == "t,cut,tail_T,case,tail_volume"
    assert len(csv) == len(rep.rows) + 1
    decay = rep.decay_curve()
    assert np.all(np.diff(decay[:, 1]) <= 1e-12)


def test_lambda_examples():
    assert m_to_lambda(1.0, 1.7, 2) == 1.0
    assert m_to_lambda(0.25, 2, 2) == pytest.approx(0.5, rel=1e-12)
    assert m_to_lambda(0.001, 1, 3) == pytest.approx(0.01, rel=1e-12)


@pytest.mark.parametrize("p,d", [(1, 1), (2, 1), (1, 2), (2, 2), (1, 3), (2, 3)])
def test_lambda_roundtrip_wide_range(p, d):
    for lam in np.logspace(-6, 6, 25):
        assert m_to_lambda(lambda_to_m(lam, p, d), p, d) == pytest.approx(lam, rel=1e-12)


def test_energy_translation_invariant_bit_exact():
    from ptlab.lattice import translate

    G, _, _ = ball_with_satellite(1 / 40, 0.25, 0.03, 0.6)
    a = energy_T(G, 1.0, euclid=False)
    b = energy_T(translate(G, (17, -9)), 1.0, euclid=False)
    assert a.total_T == b.total_T
    assert a.total_T == pytest.approx(a.face_perimeter + a.w_functional, abs=1e-10)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_disk_energy_upper_bound(p):
    from ptlab.lattice import c0, volume

    B = ball_set([0, 0], 0.3, 1 / 60, 2)
    m = volume(B)
    rep = energy_T(B, p, euclid=False)
    face_calibration = 4 / math.pi
    assert rep.total_T <= 2 * math.sqrt(math.pi * m) * face_calibration * 1.02 + c0(2) * m ** (1 / p + 1 / 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=2, max_size=30, unique=True),
       st.integers(1, 2 ** 30), st.sampled_from([1.0, 2.0]))
def test_cost_superadditive_over_partitions(cells, mask, p):
    # an optimal plan for G restricted to each part is feasible for that part
    from ptlab.transport import wasserstein_functional

    pick = [(mask >> i) & 1 for i in range(len(cells))]
    if all(pick) or not any(pick):
        return
    G = LatticeSet.from_cells(cells, 0.1, 2)
    G1 = LatticeSet.from_cells([c for c, k in zip(cells, pick) if k], 0.1, 2)
    G2 = G - G1
    cost = lambda S: wasserstein_functional(S, p).value ** p
    assert cost(G) >= cost(G1) + cost(G2) - 1e-12
