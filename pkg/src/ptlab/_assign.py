"""Sparse rectangular assignment by successive shortest augmenting paths.

Rows are sources (all must be matched), columns are sinks with unit
capacity.  Dijkstra runs on reduced costs ``c - u - v``.  Invariants kept
between calls:

* ``c - u - v >= 0`` on every edge of the current graph, ``= 0`` on matched edges;
* ``v <= 0`` everywhere and ``v = 0`` on unmatched columns.

These are the complementary-slackness conditions of "ship every row, each
column at most once", so a full matching together with a clean pricing pass
over all pairs is a certificate of optimality.
"""
from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _heap_push(hk, hv, size, key, val):
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if hk[parent] <= hk[i]:
            break
        hk[parent], hk[i] = hk[i], hk[parent]
        hv[parent], hv[i] = hv[i], hv[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(hk, hv, size):
    key = hk[0]
    val = hv[0]
    size -= 1
    hk[0] = hk[size]
    hv[0] = hv[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        small = left
        if left + 1 < size and hk[left + 1] < hk[left]:
            small = left + 1
        if hk[i] <= hk[small]:
            break
        hk[small], hk[i] = hk[i], hk[small]
        hv[small], hv[i] = hv[i], hv[small]
        i = small
    return key, val, size


@njit(cache=True)
def repair_duals(n_rows, indptr, indices, costs, row_to_col, col_to_row, u, v, tol, reset):
    """Restore ``c - u - v >= 0`` after edges were added to the graph.

    Rows with a negative reduced cost get their potential lowered; a row
    whose matched edge stops being tight is unmatched.  With ``reset`` its
    column goes back to ``v = 0``, which may in turn trigger further rows;
    without it the column keeps its potential and the caller must clear
    free columns with ``v < 0`` later.
    """
    changed = True
    while changed:
        changed = False
        for i in range(n_rows):
            lo = INF
            for e in range(indptr[i], indptr[i + 1]):
                r = costs[e] - v[indices[e]]
                if r < lo:
                    lo = r
            if lo < u[i] - tol:
                u[i] = lo
                j = row_to_col[i]
                if j >= 0:
                    row_to_col[i] = -1
                    col_to_row[j] = -1
                    if reset and v[j] != 0.0:
                        v[j] = 0.0
                        changed = True


@njit(cache=True)
def augment(n_rows, n_cols, indptr, indices, costs, row_to_col, col_to_row, u, v):
    """Match every unmatched row by shortest augmenting paths.  Returns 0 or 1 (infeasible)."""
    dist = np.full(n_cols, INF)
    done = np.zeros(n_cols, dtype=np.bool_)
    pred = -np.ones(n_cols, dtype=np.int64)
    touched = np.empty(n_cols, dtype=np.int64)
    finals = np.empty(n_cols, dtype=np.int64)
    cap = indptr[n_rows] + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)

    for root in range(n_rows):
        if row_to_col[root] >= 0:
            continue
        n_touched = 0
        n_final = 0
        size = 0
        sink = -1
        delta = 0.0
        for e in range(indptr[root], indptr[root + 1]):
            j = indices[e]
            rc = costs[e] - u[root] - v[j]
            if rc < 0.0:
                rc = 0.0
            if rc < dist[j]:
                if dist[j] == INF:
                    touched[n_touched] = j
                    n_touched += 1
                dist[j] = rc
                pred[j] = root
                size = _heap_push(hk, hv, size, rc, j)
        while size > 0:
            key, j, size = _heap_pop(hk, hv, size)
            if done[j] or key > dist[j]:
                continue
            done[j] = True
            finals[n_final] = j
            n_final += 1
            if col_to_row[j] < 0:
                sink = j
                delta = key
                break
            i = col_to_row[j]
            for e in range(indptr[i], indptr[i + 1]):
                k = indices[e]
                if done[k]:
                    continue
                rc = costs[e] - u[i] - v[k]
                if rc < 0.0:
                    rc = 0.0
                nd = key + rc
                if nd < dist[k]:
                    if dist[k] == INF:
                        touched[n_touched] = k
                        n_touched += 1
                    dist[k] = nd
                    pred[k] = i
                    if size >= cap:
                        size = 0
                        for t in range(n_touched):
                            c = touched[t]
                            if not done[c]:
                                size = _heap_push(hk, hv, size, dist[c], c)
                    else:
                        size = _heap_push(hk, hv, size, nd, k)
        if sink < 0:
            for t in range(n_touched):
                c = touched[t]
                dist[c] = INF
                done[c] = False
                pred[c] = -1
            return 1
        u[root] += delta
        for t in range(n_final):
            j = finals[t]
            if j == sink:
                continue
            shift = delta - dist[j]
            v[j] -= shift
            u[col_to_row[j]] += shift
        j = sink
        while True:
            i = pred[j]
            prev = row_to_col[i]
            row_to_col[i] = j
            col_to_row[j] = i
            if i == root:
                break
            j = prev
        for t in range(n_touched):
            c = touched[t]
            dist[c] = INF
            done[c] = False
            pred[c] = -1
    return 0


@njit(cache=True)
def _cost(a, b, p):
    s = 0.0
    for k in range(a.shape[0]):
        t = a[k] - b[k]
        s += t * t
    if p == 2.0:
        return s
    if p == 1.0:
        return np.sqrt(s)
    return s ** (0.5 * p)


@njit(cache=True)
def edge_costs(src, snk, rows, cols, p):
    out = np.empty(rows.shape[0])
    for e in range(rows.shape[0]):
        out[e] = _cost(src[rows[e]], snk[cols[e]], p)
    return out


@njit(cache=True)
def _keep_most_negative(best_rc, best_j, m, per_row, rc, j):
    if m < per_row:
        best_rc[m] = rc
        best_j[m] = j
        return m + 1
    w = 0
    for t in range(1, per_row):
        if best_rc[t] > best_rc[w]:
            w = t
    if rc < best_rc[w]:
        best_rc[w] = rc
        best_j[w] = j
    return m


@njit(cache=True)
def price_dense(src, snk, p, u, v, tol, per_row):
    """All pairs with reduced cost below ``-tol`` (at most ``per_row`` per row)."""
    n = src.shape[0]
    K = snk.shape[0]
    out_i = np.empty(n * per_row, dtype=np.int64)
    out_j = np.empty(n * per_row, dtype=np.int64)
    count = 0
    best_rc = np.empty(per_row)
    best_j = np.empty(per_row, dtype=np.int64)
    for i in range(n):
        m = 0
        for j in range(K):
            rc = _cost(src[i], snk[j], p) - u[i] - v[j]
            if rc < -tol:
                m = _keep_most_negative(best_rc, best_j, m, per_row, rc, j)
        for t in range(m):
            out_i[count] = i
            out_j[count] = best_j[t]
            count += 1
    return out_i[:count], out_j[:count]


@njit(cache=True)
def price_lattice(src, p, u, v, tol, per_row, grid, grid_origin, offsets, offset_norm):
    """Pricing when sinks are lattice cells indexed by ``grid`` (value -1 = not a sink).

    Since ``v <= 0`` a violating pair needs ``|x - y|^p < u_i``, so row ``i``
    scans offsets with norm below ``u_i^(1/p)`` only.  ``offsets`` must cover
    the whole grid extent and be sorted by ``offset_norm``.
    """
    n, d = src.shape
    out_i = np.empty(n * per_row, dtype=np.int64)
    out_j = np.empty(n * per_row, dtype=np.int64)
    count = 0
    best_rc = np.empty(per_row)
    best_j = np.empty(per_row, dtype=np.int64)
    shape = grid.shape
    flat = grid.ravel()
    fsrc = np.empty(d)
    fsnk = np.empty(d)
    for i in range(n):
        if u[i] <= tol:
            continue
        radius = (u[i] + tol) ** (1.0 / p)
        m = 0
        for k in range(d):
            fsrc[k] = src[i, k]
        for o in range(offsets.shape[0]):
            if offset_norm[o] > radius:
                break
            lin = 0
            inside = True
            for k in range(d):
                q = np.int64(src[i, k]) + offsets[o, k] - grid_origin[k]
                if q < 0 or q >= shape[k]:
                    inside = False
                    break
                lin = lin * shape[k] + q
            if not inside:
                continue
            j = flat[lin]
            if j < 0:
                continue
            for k in range(d):
                fsnk[k] = fsrc[k] + offsets[o, k]
            rc = _cost(fsrc, fsnk, p) - u[i] - v[j]
            if rc < -tol:
                m = _keep_most_negative(best_rc, best_j, m, per_row, rc, j)
        for t in range(m):
            out_i[count] = i
            out_j[count] = best_j[t]
            count += 1
    return out_i[:count], out_j[:count]


@njit(cache=True)
def nearest_lattice_sinks(src, k, grid, grid_origin, offsets):
    """First ``k`` sinks met while scanning offsets by increasing norm, per row."""
    n, d = src.shape
    out = -np.ones((n, k), dtype=np.int64)
    shape = grid.shape
    flat = grid.ravel()
    for i in range(n):
        m = 0
        for o in range(offsets.shape[0]):
            lin = 0
            inside = True
            for a in range(d):
                q = src[i, a] + offsets[o, a] - grid_origin[a]
                if q < 0 or q >= shape[a]:
                    inside = False
                    break
                lin = lin * shape[a] + q
            if not inside:
                continue
            j = flat[lin]
            if j >= 0:
                out[i, m] = j
                m += 1
                if m == k:
                    break
    return out


@njit(cache=True)
def greedy_lattice(src, order, grid, grid_origin, offsets, n_cols):
    """Feasible matching: rows in ``order`` take the nearest untaken sink."""
    n, d = src.shape
    taken = np.zeros(n_cols, dtype=np.bool_)
    out = -np.ones(n, dtype=np.int64)
    shape = grid.shape
    flat = grid.ravel()
    for t in range(n):
        i = order[t]
        for o in range(offsets.shape[0]):
            lin = 0
            inside = True
            for a in range(d):
                q = src[i, a] + offsets[o, a] - grid_origin[a]
                if q < 0 or q >= shape[a]:
                    inside = False
                    break
                lin = lin * shape[a] + q
            if not inside:
                continue
            j = flat[lin]
            if j >= 0 and not taken[j]:
                taken[j] = True
                out[i] = j
                break
    return out


@njit(cache=True)
def greedy_dense(src, snk, order):
    n = src.shape[0]
    K = snk.shape[0]
    taken = np.zeros(K, dtype=np.bool_)
    out = -np.ones(n, dtype=np.int64)
    for t in range(n):
        i = order[t]
        best = INF
        bj = -1
        for j in range(K):
            if taken[j]:
                continue
            c = _cost(src[i], snk[j], 2.0)
            if c < best:
                best = c
                bj = j
        taken[bj] = True
        out[i] = bj
    return out
