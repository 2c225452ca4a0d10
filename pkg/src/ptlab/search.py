"""Volume-preserving simulated annealing for T(E), the d=1 equal-intervals
oracle, and sweeps over m.

The chain moves one cell at a time.  Perimeter changes are exact (face
counts).  The transport term between checkpoints comes from a frozen plan:
every cell of E keeps a private sink, and a move only re-routes the cells it
touches to their nearest free sink.  Any such plan is feasible, so the
estimate bounds the exact value from above.  Every ``w_recompute_period``
moves the plan is replaced by an exact optimum and only these exact values
enter the best-set bookkeeping.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .lattice import (
    LatticeSet,
    ball_set,
    ball_volume,
    c0,
    component_count,
    face_perimeter,
    repair_count,
    volume,
)
from . import _chain
from .transport import monotone_cost_1d, wasserstein_functional


class WindowCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnnealConfig:
    p: float = 1.0
    d: int = 2
    m: float = 1.0
    h: float = 0.05
    moves_per_temp: int = 500
    temp_initial: float = 0.1
    temp_decay: float = 0.95
    w_recompute_period: int = 200
    seed: int = 0
    max_temps: int = 60
    teleport_prob: float = 0.1
    teleport_radius: float | None = None  # default 3 (m/omega_d)^(1/d)
    window_cap: int = 20_000_000

    def __post_init__(self):
        if not 0 < self.temp_decay < 1:
            raise ValueError("temp_decay must lie in (0, 1)")
        for name in ("moves_per_temp", "w_recompute_period", "max_temps", "window_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.temp_initial < 0:
            raise ValueError("temp_initial must be non-negative")
        if not 0 <= self.teleport_prob <= 1:
            raise ValueError("teleport_prob must lie in [0, 1]")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")

    @property
    def scatter_radius(self) -> float:
        if self.teleport_radius is not None:
            return self.teleport_radius
        return 3 * (self.m / ball_volume(self.d)) ** (1 / self.d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TempRecord:
    level: int
    temperature: float
    best_T: float
    current_T: float
    acceptance_rate: float
    exact_w_at_checkpoints: list[float]


@dataclass
class Checkpoint:
    move: int
    exact_T: float
    exact_W: float
    estimated_W: float
    perimeter: float


@dataclass
class SearchTrace:
    records: list[TempRecord] = field(default_factory=list)
    checkpoints: list[Checkpoint] = field(default_factory=list)
    best_T: float = math.inf
    best_set: LatticeSet | None = None
    wall_time: float = 0.0

    def to_dict(self, include_time: bool = False) -> dict:
        out = {
            "best_T": self.best_T,
            "records": [asdict(r) for r in self.records],
            "checkpoints": [asdict(c) for c in self.checkpoints],
        }
        if include_time:
            out["wall_time"] = self.wall_time
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "temperature", "best_T", "current_T", "acceptance_rate", "exact_w_at_checkpoints"])
        for r in self.records:
            w.writerow([r.level, repr(r.temperature), repr(r.best_T), repr(r.current_T), repr(r.acceptance_rate),
                        ";".join(repr(x) for x in r.exact_w_at_checkpoints)])
        return buf.getvalue()


class _Chain:
    """Working state of one chain on a flat grid over the working window."""

    def __init__(self, E: LatticeSet, cfg: AnnealConfig):
        self.cfg = cfg
        self.d = E.dim
        self.h = E.spacing
        self.p = float(cfg.p)
        self.n = E.count
        center = E.centroid() / self.h - 0.5  # cell coordinates
        self.tele_r = cfg.scatter_radius / self.h
        self.sink_r = c0(self.d) * self.n ** (1 / self.d) + 2 * math.sqrt(self.d) + 2
        self.pad = int(math.ceil(self.sink_r)) + 2
        cells = E.cells()
        lo = np.minimum(cells.min(axis=0), np.floor(center - self.tele_r).astype(int))
        hi = np.maximum(cells.max(axis=0), np.ceil(center + self.tele_r).astype(int))
        self.center_abs = center
        self._build(lo - self.pad, hi + self.pad + 1, cells, None)

    def _build(self, lo, hi, cells, sinks):
        d = self.d
        shape = tuple(int(x) for x in hi - lo)
        size = int(np.prod(shape))
        if size > self.cfg.window_cap:
            raise WindowCapError(f"working window {shape} exceeds cap {self.cfg.window_cap}")
        self.lo = np.asarray(lo, dtype=np.int64)
        self.shape = np.asarray(shape, dtype=np.int64)
        self.strides = np.array([int(np.prod(shape[a + 1:])) for a in range(d)], dtype=np.int64)
        self.center = self.center_abs - self.lo
        self.occ = np.zeros(size, dtype=np.int8)
        self.slot_at = np.full(size, -1, dtype=np.int64)
        self.owner = np.full(size, -1, dtype=np.int64)
        self.src = self._flat(cells)
        self.occ[self.src] = 1
        self.slot_at[self.src] = np.arange(self.n)
        self.sink = np.full(self.n, -1, dtype=np.int64)
        if sinks is not None:
            self.sink = self._flat(sinks)
            self.owner[self.sink] = np.arange(self.n)
        r = int(math.ceil(self.sink_r))
        ax = np.arange(-r, r + 1)
        off = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
        nrm2 = (off ** 2).sum(axis=1)
        keep = nrm2 <= self.sink_r ** 2
        off, nrm2 = off[keep], nrm2[keep]
        order = np.lexsort(tuple(off[:, k] for k in range(d - 1, -1, -1)) + (nrm2,))
        self.off_flat = np.ascontiguousarray((off[order] * self.strides).sum(axis=1))
        n2 = nrm2[order].astype(float)
        self.off_cost = n2 if self.p == 2 else np.sqrt(n2) ** self.p
        self.nbr = np.array([int(s) for s in self.strides] + [-int(s) for s in self.strides], dtype=np.int64)
        bnd = np.zeros(size, dtype=bool)
        for s in self.nbr:
            bnd[self.src] |= self.occ[self.src + s] == 0
        blist = np.flatnonzero(bnd)
        self.blist = np.zeros(self.n, dtype=np.int64)
        self.blist[: len(blist)] = blist
        self.bpos = np.full(size, -1, dtype=np.int64)
        self.bpos[blist] = np.arange(len(blist))
        self.nb = len(blist)

    def _flat(self, cells) -> np.ndarray:
        return ((np.asarray(cells, dtype=np.int64) - self.lo) * self.strides).sum(axis=1)

    def _cells(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        return np.stack(np.unravel_index(flat, tuple(self.shape)), axis=1) + self.lo

    def grow(self):
        cells, sinks = self._cells(self.src), self._cells(self.sink)
        span = self.shape
        self._build(self.lo - span // 2, self.lo + span + span // 2, cells, sinks)

    def lattice_set(self) -> LatticeSet:
        return LatticeSet.from_cells(self._cells(self.src), self.h, self.d)

    def face_count(self) -> int:
        return int(sum((self.occ[self.src + s] == 0).sum() for s in self.nbr))

    def load_plan(self, res) -> float:
        self.owner[self.sink[self.sink >= 0]] = -1
        slots = self.slot_at[self._flat(res.plan.src_cells)]
        self.sink[slots] = self._flat(res.plan.dst_cells)
        self.owner[self.sink] = np.arange(self.n)
        diff = self._cells(self.src) - self._cells(self.sink)
        sq = (diff ** 2).sum(axis=1).astype(float)
        return math.fsum((sq if self.p == 2 else np.sqrt(sq) ** self.p).tolist())

    def run(self, n_moves, temp, swaps_only, rng, faces, cost):
        state = np.array([faces, cost, self.nb], dtype=float)
        done, acc, grow = _chain.run_block(
            n_moves, float(temp), float(self.cfg.teleport_prob), bool(swaps_only), rng,
            self.occ, self.slot_at, self.owner, self.src, self.sink, self.bpos, self.blist, state,
            self.strides, self.shape, self.nbr, self.off_flat, self.off_cost,
            np.asarray(self.center, dtype=float), float(self.tele_r), int(self.pad),
            self.h ** (self.d - 1), self.h ** (self.d + self.p), self.p,
        )
        self.nb = int(state[2])
        if grow:
            self.grow()
        return done, acc, state[0], state[1]


def _exact(chain: _Chain):
    S = chain.lattice_set()
    res = wasserstein_functional(S, chain.p)
    return S, res, face_perimeter(S)


def anneal(init: LatticeSet, cfg: AnnealConfig, swaps_only: bool = False) -> tuple[LatticeSet, SearchTrace]:
    """Metropolis annealing of ``P + W`` at fixed cell count."""
    t_start = time.perf_counter()
    if init.is_empty():
        raise ValueError("empty initial set")
    if init.dim != cfg.d:
        raise ValueError("init dimension does not match cfg.d")
    h, d = init.spacing, init.dim
    if not math.isclose(h, cfg.h, rel_tol=1e-12):
        raise ValueError("init spacing does not match cfg.h")
    if abs(init.count * h ** d - cfg.m) > h ** d * (1 + 1e-9):
        raise ValueError(f"init volume {init.count * h ** d} differs from m={cfg.m} by more than one cell")
    rng = np.random.default_rng(cfg.seed)
    chain = _Chain(init, cfg)
    p = cfg.p
    wscale = h ** (d + p)
    trace = SearchTrace()

    def checkpoint(move):
        S, res, P = _exact(chain)
        T = P + res.value
        trace.checkpoints.append(Checkpoint(move, T, res.value, (wscale * max(cost, 0.0)) ** (1 / p), P))
        if T < trace.best_T:
            trace.best_T, trace.best_set = T, S
        return res

    cost = 0.0
    res = checkpoint(0)
    trace.checkpoints[0].estimated_W = res.value
    cost = chain.load_plan(res)
    faces = chain.face_count()
    temp = cfg.temp_initial
    move = 0
    period = cfg.w_recompute_period
    for level in range(cfg.max_temps):
        accepted = 0
        left = cfg.moves_per_temp
        exact_ws = []
        while left:
            block = min(left, period - move % period)
            done, acc, faces, cost = chain.run(block, temp, swaps_only, rng, faces, cost)
            accepted += acc
            left -= done
            move += done
            if move % period == 0:
                res = checkpoint(move)
                exact_ws.append(res.value)
                cost = chain.load_plan(res)
                faces = chain.face_count()
        current = faces * h ** (d - 1) + (wscale * max(cost, 0.0)) ** (1 / p)
        trace.records.append(TempRecord(level, temp, trace.best_T, current,
                                        accepted / cfg.moves_per_temp, exact_ws))
        temp *= cfg.temp_decay
    if move % period:
        res = checkpoint(move)
        if trace.records:
            trace.records[-1].exact_w_at_checkpoints.append(res.value)
    trace.wall_time = time.perf_counter() - t_start
    return trace.best_set, trace


# ---------------------------------------------------------------------------
# d = 1 oracle

@dataclass(frozen=True)
class OracleRow:
    k: int
    perimeter: float
    w: float
    T: float


def _intervals(n_total: int, k: int, gap: int):
    base, extra = divmod(n_total, k)
    sizes = [base + (1 if i < extra else 0) for i in range(k)]
    cells, fcells, x = [], [], 0
    for s in sizes:
        left = s // 2
        cells.extend(range(x, x + s))
        fcells.extend(range(x - left, x))
        fcells.extend(range(x + s, x + s + (s - left)))
        x += s + gap
    return sizes, cells, fcells


def equal_intervals_oracle(m: float, p: float, k_max: int, h: float) -> tuple[list[OracleRow], int]:
    """T for ``k`` equal intervals of total length ``m`` paired with flanking half-intervals."""
    n_total = int(round(m / h))
    if n_total < 1:
        raise ValueError("m/h must be at least one cell")
    rows = []
    for k in range(1, min(k_max, n_total) + 1):
        gap = int(math.ceil(4 * m / k / h))
        sizes, cells, fcells = _intervals(n_total, k, gap)
        E = LatticeSet.from_cells([(c,) for c in cells], h, 1)
        F = LatticeSet.from_cells([(c,) for c in fcells], h, 1)
        w = monotone_cost_1d(E, F, p) ** (1 / p)
        per = 2.0 * k
        rows.append(OracleRow(k, per, w, per + w))
    best = min(rows, key=lambda r: (r.T, r.k)).k
    return rows, best


# ---------------------------------------------------------------------------
# sweeps

def ball_init(m: float, d: int, h: float) -> LatticeSet:
    n = int(round(m / h ** d))
    r = (m / ball_volume(d)) ** (1 / d)
    B = ball_set(np.full(d, 0.5 * h), r, h, d)
    if B.is_empty():
        B = LatticeSet.from_cells([np.zeros(d, dtype=int)], h, d)
    return repair_count(B, n)


def random_init(m: float, d: int, h: float, seed: int, radius: float | None = None) -> LatticeSet:
    """``round(m/h^d)`` distinct cells drawn uniformly from the disk of radius ``3 (m/omega_d)^(1/d)``."""
    n = int(round(m / h ** d))
    R = 3 * (m / ball_volume(d)) ** (1 / d) if radius is None else radius
    rc = R / h
    r = int(math.floor(rc))
    ax = np.arange(-r, r + 1)
    pool = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    pool = pool[((pool + 0.5) ** 2).sum(axis=1) <= rc * rc]
    if len(pool) < n:
        raise ValueError("scatter disk holds fewer cells than required")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(pool), size=n, replace=False)
    return LatticeSet.from_cells(pool[np.sort(pick)], h, d)


@dataclass
class SweepRecord:
    m: float
    init: str
    best_T: float
    ball_T: float
    ratio: float
    components: int
    equivalent_lambda: float | None
    restarts: int = 1
    best_seed: int = 0


def _best_of(runs):
    # lowest T wins; ties go to the earliest run
    return min(enumerate(runs), key=lambda it: (it[1][2].best_T, it[0]))[1]


def sweep(m_values, p: float, d: int, cfg: AnnealConfig, inits=("ball", "random"),
          restarts: int = 1, on_run=None) -> list[SweepRecord]:
    """Anneal from each init kind for every ``m``.

    Random inits are restarted ``restarts`` times with seeds ``seed + j`` and
    the lowest exact energy is kept.  ``on_run(m, kind, seed, trace)`` is
    called after every single run.
    """
    from dataclasses import replace

    from .reduction import m_to_lambda

    if restarts < 1:
        raise ValueError("restarts must be positive")
    out = []
    for i, m in enumerate(m_values):
        c = replace(cfg, m=float(m), p=float(p), d=d)
        B = ball_init(m, d, c.h)
        ball_T = face_perimeter(B) + wasserstein_functional(B, p).value
        for kind in inits:
            if kind not in ("ball", "random"):
                raise ValueError(f"unknown init kind {kind!r}")
            runs = []
            for j in range(1 if kind == "ball" else restarts):
                seed = c.seed + j
                init = B if kind == "ball" else random_init(m, d, c.h, seed + 1000 * i, c.scatter_radius)
                c_run = replace(c, m=init.count * c.h ** d, seed=seed)
                runs.append((seed, *anneal(init, c_run)))
                if on_run is not None:
                    on_run(float(m), kind, seed, runs[-1][2])
            seed, best, trace = _best_of(runs)
            try:
                lam = m_to_lambda(m, p, d)
            except ValueError:
                lam = None
            out.append(SweepRecord(float(m), kind, trace.best_T, ball_T, trace.best_T / ball_T,
                                   component_count(best), lam, len(runs), seed))
    return out


def sweep_json(records, cfg: AnnealConfig) -> str:
    return json.dumps({"config": cfg.to_dict(), "records": [asdict(r) for r in records]}, indent=2, sort_keys=True)
