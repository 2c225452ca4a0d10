"""Exhaustive reference for the transport functional on tiny sets (d <= 2).

Every cell of E is sent to a distinct cell outside E.  In an optimal map a
source never uses a sink farther than its ``n``-th nearest free cell: at most
``n - 1`` of those are taken by other sources, so a strictly cheaper free one
would remain.  The search therefore enumerates every injective map into these
candidate lists (ties at the cut-off included), pruned only by a bound that
cannot discard an optimum.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np
from numba import njit

from .lattice import LatticeSet


@njit(cache=True)
def _candidates(cells, dim, p):
    n = cells.shape[0]
    R = 2 * n
    lo0 = cells[:, 0].min() - R
    s0 = cells[:, 0].max() + R + 1 - lo0
    if dim == 2:
        lo1 = cells[:, 1].min() - R
        s1 = cells[:, 1].max() + R + 1 - lo1
    else:
        lo1 = 0
        s1 = 1
    occ = np.zeros((s0, s1), dtype=np.bool_)
    for i in range(n):
        occ[cells[i, 0] - lo0, cells[i, 1] - lo1 if dim == 2 else 0] = True
    w1 = 2 * R + 1 if dim == 2 else 1
    K = (2 * R + 1) * w1
    cand = np.full((n, K), -1, dtype=np.int64)
    cost = np.full((n, K), np.inf)
    ncand = np.zeros(n, dtype=np.int64)
    tmp_c = np.empty(K)
    tmp_i = np.empty(K, dtype=np.int64)
    for i in range(n):
        m = 0
        x0 = cells[i, 0] - lo0
        y0 = cells[i, 1] - lo1 if dim == 2 else 0
        for a in range(-R, R + 1):
            for b in range(-R if dim == 2 else 0, (R if dim == 2 else 0) + 1):
                x = x0 + a
                y = y0 + b
                if occ[x, y]:
                    continue
                r2 = float(a * a + b * b)
                if r2 > R * R:
                    continue
                tmp_c[m] = r2 if p == 2.0 else r2 ** (0.5 * p)
                tmp_i[m] = x * s1 + y
                m += 1
        order = np.argsort(tmp_c[:m], kind="mergesort")
        cut = tmp_c[order[n - 1]]
        k = 0
        for o in order:
            if tmp_c[o] > cut:
                break
            cand[i, k] = tmp_i[o]
            cost[i, k] = tmp_c[o]
            k += 1
        ncand[i] = k
    return cand, cost, ncand, s0 * s1


@njit(cache=True)
def _search(cand, cost, ncand, n_cells):
    n = cand.shape[0]
    used = np.zeros(n_cells, dtype=np.bool_)
    # cheapest remaining completion, used as an admissible bound
    tail = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        tail[i] = tail[i + 1] + cost[i, 0]
    choice = np.zeros(n, dtype=np.int64)
    best = np.inf
    partial = np.zeros(n + 1)
    level = 0
    choice[0] = -1
    leaves = 0
    while level >= 0:
        if choice[level] >= 0:
            used[cand[level, choice[level]]] = False
        choice[level] += 1
        advanced = False
        while choice[level] < ncand[level]:
            j = choice[level]
            c = cand[level, j]
            if not used[c]:
                val = partial[level] + cost[level, j]
                if val + tail[level + 1] <= best * (1 + 1e-12):
                    used[c] = True
                    partial[level + 1] = val
                    advanced = True
                    break
            choice[level] += 1
        if not advanced:
            choice[level] = -1
            level -= 1
            continue
        if level == n - 1:
            leaves += 1
            if partial[n] < best:
                best = partial[n]
            continue
        level += 1
        choice[level] = -1
    return best, leaves


def brute_force_cost(E: LatticeSet, p: float) -> float:
    """Minimal ``sum |x - T(x)|^p`` in cell units over injective maps from E
    into its complement."""
    if E.dim > 2:
        raise ValueError("brute force supports d <= 2")
    if E.count == 0:
        raise ValueError("empty set")
    cells = E.cells().astype(np.int64)
    if E.dim == 1:
        cells = np.hstack([cells, np.zeros_like(cells)])
    cand, cost, ncand, n_cells = _candidates(cells, E.dim, float(p))
    best, _ = _search(cand, cost, ncand, n_cells)
    return float(best)


def brute_force_value(E: LatticeSet, p: float) -> float:
    h, d = E.spacing, E.dim
    return float((h ** d * h ** p * brute_force_cost(E, p)) ** (1 / p))


# ---------------------------------------------------------------------------
# enumeration of small sets up to lattice symmetry


def small_sets_1d(window: int, max_cells: int):
    """All subsets of ``{0..window-1}`` with at most ``max_cells`` cells, one per
    class under translation and reflection.  Yields tuples of cell indices
    starting at 0."""
    for k in range(1, max_cells + 1):
        for rest in combinations(range(1, window), k - 1):
            cells = (0,) + rest
            top = cells[-1]
            mirror = tuple(sorted(top - c for c in cells))
            if mirror < cells:
                continue
            yield cells


def _canonical_2d(cells: np.ndarray) -> bytes:
    keys = []
    x, y = cells[:, 0], cells[:, 1]
    for a, b in ((x, y), (y, x)):
        for sa in (1, -1):
            for sb in (1, -1):
                q = np.stack([sa * a, sb * b], axis=1)
                q = q - q.min(axis=0)
                q = q[np.lexsort((q[:, 1], q[:, 0]))]
                keys.append(q.astype(np.int8).tobytes())
    return min(keys)


def small_sets_2d(width: int, max_cells: int):
    """All subsets of a ``width x width`` window with at most ``max_cells``
    cells, one per class under translation and the square's symmetries."""
    grid = np.array([(i, j) for i in range(width) for j in range(width)], dtype=np.int64)
    seen = set()
    for k in range(1, max_cells + 1):
        for idx in combinations(range(width * width), k):
            cells = grid[list(idx)]
            if cells[:, 0].min() or cells[:, 1].min():
                continue  # a translate touching both lower edges is enumerated instead
            key = _canonical_2d(cells)
            if key in seen:
                continue
            seen.add(key)
            yield cells
