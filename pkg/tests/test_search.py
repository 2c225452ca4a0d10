import math
from itertools import combinations

import numpy as np
import pytest

from ptlab.brute import brute_force_value
from ptlab.lattice import LatticeSet, face_perimeter
from ptlab.reduction import energy_T, total_T
from ptlab.search import (
    AnnealConfig,
    WindowCapError,
    anneal,
    ball_init,
    equal_intervals_oracle,
    random_init,
    sweep,
)


def test_oracle_perimeter_column_is_2k():
    rows, _ = equal_intervals_oracle(1.0, 1.0, 8, 1 / 200)
    assert [r.perimeter for r in rows] == [2.0 * k for k in range(1, 9)]


def test_oracle_values_m4():
    # k intervals of length m/k, each half moving sideways: T_k = 2k + m^2 / (2k)
    rows, best = equal_intervals_oracle(4.0, 1.0, 4, 1 / 200)
    assert [r.T for r in rows] == pytest.approx([10.0, 8.0, 8 + 2 / 3, 10.0], abs=1e-3)
    assert best == 2


def test_oracle_best_k_monotone_in_m():
    ks = [equal_intervals_oracle(m, 1.0, 10, 1 / 200)[1] for m in (0.5, 1, 2, 4, 8)]
    assert ks == sorted(ks)


def _brute_minimizer(n, window, h, p):
    best = (math.inf, None)
    for rest in combinations(range(1, window), n - 1):
        E = LatticeSet.from_cells(np.array((0,) + rest).reshape(-1, 1), h, 1)
        T = face_perimeter(E) + brute_force_value(E, p)
        if T < best[0] - 1e-12:
            best = (T, E)
    return best


def test_anneal_from_exact_minimizer():
    h, p = 1.0, 1.0
    T_star, E_star = _brute_minimizer(5, 30, h, p)
    cfg = AnnealConfig(p=p, d=1, m=5.0, h=h, moves_per_temp=200, temp_initial=0.5, max_temps=10,
                       w_recompute_period=50, seed=3)
    best, trace = anneal(E_star, cfg)
    assert all(c.exact_T >= T_star - 1e-9 for c in trace.checkpoints)
    assert trace.best_T == pytest.approx(T_star, abs=1e-12)


def test_zero_temperature_swaps_monotone():
    init = random_init(0.6, 1, 1 / 50, seed=1)
    cfg = AnnealConfig(p=1.0, d=1, m=init.count / 50, h=1 / 50, moves_per_temp=300, temp_initial=0.0,
                       max_temps=5, w_recompute_period=100, seed=2)
    _, trace = anneal(init, cfg, swaps_only=True)
    Ts = [c.exact_T for c in trace.checkpoints]
    assert all(b <= a + 1e-12 for a, b in zip(Ts, Ts[1:]))


@pytest.fixture(scope="module")
def run2d():
    h, m = 0.05, 0.2
    init = random_init(m, 2, h, seed=4)
    cfg = AnnealConfig(p=1.0, d=2, m=init.count * h * h, h=h, seed=5)
    best, trace = anneal(init, cfg)
    return init, best, trace, cfg


def test_volume_conserved(run2d):
    init, best, trace, _ = run2d
    assert best.count == init.count


def test_best_T_is_exact(run2d):
    _, best, trace, _ = run2d
    assert trace.best_T == pytest.approx(total_T(best, 1.0), abs=1e-10)
    assert trace.best_T == min(c.exact_T for c in trace.checkpoints)


def test_best_T_non_increasing(run2d):
    _, _, trace, _ = run2d
    b = [r.best_T for r in trace.records]
    assert all(y <= x for x, y in zip(b, b[1:]))


def test_estimate_bounds_exact(run2d):
    _, _, trace, _ = run2d
    assert all(c.estimated_W >= c.exact_W - 1e-12 for c in trace.checkpoints)


def test_random_scatter_reaches_ball_level(run2d):
    _, _, trace, cfg = run2d
    B = ball_init(cfg.m, 2, cfg.h)
    assert trace.best_T <= 1.05 * energy_T(B, 1.0, euclid=False).total_T


def test_trace_is_reproducible(run2d):
    init, _, trace, cfg = run2d
    _, again = anneal(init, cfg)
    assert again.to_dict() == trace.to_dict()
    assert again.to_csv() == trace.to_csv()
    assert trace.to_csv().splitlines()[0].startswith("level,temperature,best_T")


def test_window_cap():
    init = ball_init(0.2, 2, 0.05)
    with pytest.raises(WindowCapError):
        anneal(init, AnnealConfig(d=2, m=init.count * 0.0025, h=0.05, window_cap=100))


@pytest.mark.parametrize("kw", [dict(temp_decay=1.0), dict(moves_per_temp=0), dict(p=0.5),
                                dict(teleport_prob=1.5), dict(temp_initial=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AnnealConfig(**kw)


def test_init_volume_checked():
    with pytest.raises(ValueError):
        anneal(ball_init(0.2, 2, 0.05), AnnealConfig(d=2, m=0.5, h=0.05))


def test_sweep_ball_row_matches_energy():
    cfg = AnnealConfig(p=1.0, d=2, h=0.05, moves_per_temp=1, max_temps=1, temp_initial=0.0)
    (rec,) = sweep([0.2], 1.0, 2, cfg, inits=("ball",))
    assert rec.ball_T == pytest.approx(energy_T(ball_init(0.2, 2, 0.05), 1.0, euclid=False).total_T)
    assert rec.best_T <= rec.ball_T + 1e-12
    assert rec.equivalent_lambda == pytest.approx(0.2 ** (1 / 1 + 2 / 2 - 1))
