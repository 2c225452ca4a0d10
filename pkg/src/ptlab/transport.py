"""Exact optimal transport between lattice sets.

Both marginals put mass ``h^d`` on every cell and the ground cost is
``|x - y|^p`` between cell centers.  Equal cell masses make the flow
polytope integral, so optimal plans are assignments and the optimal target
of the inner minimization is a genuine set of cells.

Solves run on a sparse k-nearest edge set and are completed by pricing:
after each solve every (source, sink) pair of the admissible window is
checked against the dual potentials and violating edges are added, until
none remain.  The final potentials certify optimality over the whole window.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from . import _assign
from .lattice import LatticeSet, align, c0, volume


@dataclass(frozen=True)
class TransportPlan:
    """Per-cell plan: source cell ``k`` ships ``mass[k]`` to ``dst_cells[k]``."""

    src_cells: np.ndarray
    dst_cells: np.ndarray
    mass: np.ndarray
    ground_cost: np.ndarray
    p: float
    spacing: float

    @property
    def total_cost(self) -> float:
        return math.fsum((self.mass * self.ground_cost).tolist())

    @property
    def entries(self):
        for s, t, m, c in zip(self.src_cells, self.dst_cells, self.mass, self.ground_cost):
            yield tuple(s), tuple(t), float(m), float(c)

    def __len__(self) -> int:
        return len(self.mass)

    def displacements(self) -> np.ndarray:
        diff = (self.dst_cells - self.src_cells) * self.spacing
        return np.sqrt((diff ** 2).sum(axis=1))

    def to_csv(self) -> str:
        d = self.src_cells.shape[1] if self.src_cells.ndim == 2 else 1
        axes = "xyz"[:d]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"src_{a}" for a in axes] + [f"dst_{a}" for a in axes] + ["mass", "cost"])
        h = self.spacing
        for s, t, m, c in self.entries:
            w.writerow([repr((k + 0.5) * h) for k in s] + [repr((k + 0.5) * h) for k in t] + [repr(m), repr(c)])
        return buf.getvalue()


@dataclass(frozen=True)
class WassersteinResult:
    value: float
    plan: TransportPlan
    target_set: LatticeSet
    max_displacement: float
    certified: bool = True
    window_radius: float | None = None
    # dual potentials in cell units (cost |dx|^p with h = 1)
    source_potential: np.ndarray | None = field(default=None, repr=False)
    target_potential: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_cost(self) -> float:
        return self.plan.total_cost


class TransportError(RuntimeError):
    pass


def _check_p(p: float):
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")


def _settle(n, K, indptr, cols, costs, r2c, c2r, u, v, tol, lazy_rounds=1):
    """Optimal matching on the current edge set with all invariants restored.

    A lazy repair keeps the potentials of freed columns, which often makes
    the re-augmentation cheap; free columns left with ``v < 0`` are then
    cleared and the eager repair takes over after ``lazy_rounds`` attempts.
    """
    for attempt in range(lazy_rounds + 1):
        _assign.repair_duals(n, indptr, cols, costs, r2c, c2r, u, v, tol, attempt == lazy_rounds)
        if _assign.augment(n, K, indptr, cols, costs, r2c, c2r, u, v):
            raise TransportError("assignment infeasible on the current edge set")
        stale = (c2r < 0) & (v < 0)
        if not stale.any():
            return
        v[stale] = 0.0
    raise TransportError("dual repair did not settle")


def _run_pricing(n, K, rows, cols, costs_of, price, max_rounds=200):
    """Column generation around :func:`_assign.augment` with warm restarts."""
    r2c = -np.ones(n, dtype=np.int64)
    c2r = -np.ones(K, dtype=np.int64)
    u = np.full(n, np.inf)
    v = np.zeros(K)
    key = np.unique(rows * K + cols)
    for _ in range(max_rounds):
        rows, cols = key // K, key % K
        costs = costs_of(rows, cols)
        indptr = np.searchsorted(rows, np.arange(n + 1))
        tol = 1e-9 * max(1.0, float(costs.max()))
        _settle(n, K, indptr, cols, costs, r2c, c2r, u, v, tol)
        pi, pj = price(u, v, tol)
        if len(pi) == 0:
            return r2c, u, v
        key = np.union1d(key, pi * K + pj)
    raise TransportError("pricing did not converge")


def _offsets(d: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    r = int(math.ceil(radius))
    axes = [np.arange(-r, r + 1)] * d
    off = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    norm = np.sqrt((off.astype(float) ** 2).sum(axis=1))
    keep = norm <= radius
    off, norm = off[keep], norm[keep]
    order = np.lexsort(tuple(off[:, k] for k in range(d - 1, -1, -1)) + (norm,))
    return np.ascontiguousarray(off[order]), np.ascontiguousarray(norm[order])


def assign_to_lattice(src: np.ndarray, sinks: np.ndarray, p: float, k0: int = 32):
    """Exact assignment of source cells to distinct sink cells (integer coordinates).

    Returns ``(row_to_col, u, v)``; the duals are in cell units and certify
    optimality against every sink in ``sinks``.
    """
    src = np.ascontiguousarray(src, dtype=np.int64)
    sinks = np.ascontiguousarray(sinks, dtype=np.int64)
    n, K = len(src), len(sinks)
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(K)
    if K < n:
        raise TransportError(f"{n} sources but only {K} sinks")
    d = src.shape[1]
    lo = sinks.min(axis=0)
    hi = sinks.max(axis=0) + 1
    grid = -np.ones(tuple(hi - lo), dtype=np.int64)
    grid[tuple((sinks - lo).T)] = np.arange(K)
    both = np.vstack([src, sinks])
    reach = float(np.sqrt(((both.max(axis=0) - both.min(axis=0)) ** 2).sum())) + 1
    off, norm = _offsets(d, reach)
    fsrc = src.astype(float)
    fsnk = sinks.astype(float)
    near = _assign.nearest_lattice_sinks(src, min(k0, K), grid, lo, off)
    # rows closest to the sinks choose first
    first = near[:, 0]
    d0 = ((fsrc - fsnk[first]) ** 2).sum(axis=1)
    order = np.argsort(d0, kind="stable")
    greedy = _assign.greedy_lattice(src, order, grid, lo, off, K)
    rows = np.concatenate([np.repeat(np.arange(n), near.shape[1]), np.arange(n)])
    cols = np.concatenate([near.ravel(), greedy])
    ok = cols >= 0
    pf = float(p)
    return _run_pricing(
        n, K, rows[ok], cols[ok],
        lambda r, c: _assign.edge_costs(fsrc, fsnk, r, c, pf),
        lambda u, v, tol: _assign.price_lattice(fsrc, pf, u, v, tol, 64, grid, lo, off, norm),
    )


def assign_dense(src: np.ndarray, snk: np.ndarray, p: float, k0: int = 8):
    """Exact assignment between arbitrary point clouds; pricing checks all pairs."""
    src = np.ascontiguousarray(src, dtype=float)
    snk = np.ascontiguousarray(snk, dtype=float)
    n, K = len(src), len(snk)
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(K)
    if K < n:
        raise TransportError(f"{n} sources but only {K} sinks")
    k = min(k0, K)
    _, nn = cKDTree(snk).query(src, k=k)
    nn = np.asarray(nn).reshape(n, -1)
    order = np.argsort(np.sqrt(((src - snk[nn[:, 0]]) ** 2).sum(axis=1)), kind="stable")
    greedy = _assign.greedy_dense(src, snk, order)
    rows = np.concatenate([np.repeat(np.arange(n), nn.shape[1]), np.arange(n)])
    cols = np.concatenate([nn.ravel(), greedy])
    pf = float(p)
    return _run_pricing(
        n, K, rows, cols,
        lambda r, c: _assign.edge_costs(src, snk, r, c, pf),
        lambda u, v, tol: _assign.price_dense(src, snk, pf, u, v, tol, 16),
    )


def _plan(src_cells, dst_cells, p, h) -> TransportPlan:
    d = src_cells.shape[1]
    diff = (dst_cells - src_cells).astype(float)
    cost_cells = np.sqrt((diff ** 2).sum(axis=1)) ** p if p != 2 else (diff ** 2).sum(axis=1)
    return TransportPlan(
        src_cells=src_cells,
        dst_cells=dst_cells,
        mass=np.full(len(src_cells), h ** d),
        ground_cost=cost_cells * h ** p,
        p=float(p),
        spacing=h,
    )


def _result(E: LatticeSet, src_cells, dst_cells, p, u, v, window_radius=None) -> WassersteinResult:
    h = E.spacing
    plan = _plan(src_cells, dst_cells, p, h)
    value = plan.total_cost ** (1 / p)
    target = LatticeSet.from_cells(dst_cells, h, E.dim) if len(dst_cells) else LatticeSet.empty(E.dim, h)
    disp = float(plan.displacements().max()) if len(plan) else 0.0
    return WassersteinResult(
        value=value,
        plan=plan,
        target_set=target,
        max_displacement=disp,
        window_radius=window_radius,
        source_potential=u,
        target_potential=v,
    )


DENSE_LIMIT = 4000


def wasserstein_distance(E: LatticeSet, F: LatticeSet, p: float, method: str = "auto") -> WassersteinResult:
    """Exact ``W_p`` between the uniform cell measures on ``E`` and ``F``.

    ``method``: ``"lsa"`` (dense Jonker-Volgenant from scipy), ``"ssp"``
    (sparse shortest augmenting paths with pricing) or ``"auto"`` (lsa up to
    ``DENSE_LIMIT`` cells).
    """
    _check_p(p)
    E._check_compatible(F)
    if E.count != F.count:
        raise ValueError(f"unequal cell counts {E.count} != {F.count}")
    if method not in ("auto", "lsa", "ssp"):
        raise ValueError(f"unknown method {method!r}")
    src = E.cells()
    dst = F.cells()
    if len(src) == 0:
        return _result(E, src, dst, p, None, None)
    if method == "lsa" or (method == "auto" and len(src) <= DENSE_LIMIT):
        sq = cdist(src.astype(float), dst.astype(float), "sqeuclidean")
        cost = sq if p == 2 else np.sqrt(sq) ** p
        rows, r2c = linear_sum_assignment(cost)
        return _result(E, src[rows], dst[r2c], p, None, None)
    r2c, u, v = assign_dense(src.astype(float), dst.astype(float), p)
    return _result(E, src, dst[r2c], p, u, v)


def functional_window(E: LatticeSet, scale: float = 1.0) -> float:
    """Radius (length units) around ``E`` that holds every optimal target cell."""
    d, h = E.dim, E.spacing
    return scale * (c0(d) * volume(E) ** (1 / d) + 2 * h * math.sqrt(d))


def candidate_sinks(E: LatticeSet, radius: float) -> np.ndarray:
    """Cells outside ``E`` whose center is within ``radius`` of some center of ``E``."""
    h = E.spacing
    rc = radius / h
    pad = int(math.ceil(rc)) + 1
    c = E.cropped().padded(pad)
    dist = ndimage.distance_transform_edt(~c.occupancy)
    mask = (~c.occupancy) & (dist <= rc + 1e-9)
    return np.argwhere(mask) + np.asarray(c.origin)


def wasserstein_functional(E: LatticeSet, p: float, window_scale: float = 1.0) -> WassersteinResult:
    """Exact minimum of ``W_p(E, F)`` over cell sets ``F`` disjoint from ``E`` with ``|F| = |E|``.

    Sinks are all outside cells within ``window_scale * (C0(d)|E|^(1/d) + 2h*sqrt(d))``
    of ``E``.
    """
    _check_p(p)
    if E.is_empty():
        raise ValueError("wasserstein_functional of an empty set")
    radius = functional_window(E, window_scale)
    src = E.cells()
    sinks = candidate_sinks(E, radius)
    if len(sinks) < len(src):
        raise TransportError("transport window cannot hold |E|; geometry bug")
    r2c, u, v = assign_to_lattice(src, sinks, p)
    return _result(E, src, sinks[r2c], p, u, v[r2c], window_radius=radius)


def max_displacement(plan: TransportPlan) -> float:
    if len(plan) == 0:
        raise ValueError("empty plan")
    d = plan.displacements()
    return float(d[plan.mass > 0].max())


def monotone_cost_1d(E: LatticeSet, F: LatticeSet, p: float) -> float:
    """Optimal total cost in 1D by matching sorted cells (monotone rearrangement)."""
    if E.dim != 1 or F.dim != 1:
        raise ValueError("1D only")
    a = np.sort(E.cells()[:, 0])
    b = np.sort(F.cells()[:, 0])
    if len(a) != len(b):
        raise ValueError("unequal cell counts")
    h = E.spacing
    return math.fsum((h ** E.dim * (np.abs(a - b) * h) ** p).tolist())


@dataclass(frozen=True)
class SinkhornEstimate:
    value: float
    cost: float
    converged: bool
    iterations: int
    marginal_error: float
    exact: bool = False


def sinkhorn_estimate(E: LatticeSet, F: LatticeSet, p: float, reg: float, iters: int = 2000,
                      tol: float = 1e-6) -> SinkhornEstimate:
    """Entropic estimate of ``W_p(E, F)`` by log-domain Sinkhorn scaling.

    Not exact; intended for cheap comparisons only.  On non-convergence the
    last iterate is returned with ``converged=False``.
    """
    from scipy.special import logsumexp

    _check_p(p)
    if reg <= 0:
        raise ValueError("reg must be positive")
    if E.count != F.count:
        raise ValueError("unequal cell counts")
    n = E.count
    if n == 0:
        return SinkhornEstimate(0.0, 0.0, True, 0, 0.0)
    C = cdist(E.centers(), F.centers()) ** p
    loga = np.full(n, -math.log(n))
    f = np.zeros(n)
    g = np.zeros(n)
    err = np.inf
    it = 0
    for it in range(1, iters + 1):
        f = reg * (loga - logsumexp((g[None, :] - C) / reg, axis=1))
        g = reg * (loga - logsumexp((f[:, None] - C) / reg, axis=0))
        logP = (f[:, None] + g[None, :] - C) / reg
        err = float(np.abs(np.exp(logsumexp(logP, axis=1)) - 1.0 / n).sum())
        if err < tol:
            break
    P = np.exp((f[:, None] + g[None, :] - C) / reg)
    cost = volume(E) * float((P * C).sum())
    return SinkhornEstimate(cost ** (1 / p), cost, err < tol, it, err)


def overlap_count(A: LatticeSet, B: LatticeSet) -> int:
    a, b, _ = align(A, B)
    return int((a & b).sum())
