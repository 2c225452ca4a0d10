"""Nucleation covering, slice selection and the covering-packing rearrangement.

Length conventions: ``unit_scale`` is the physical length that plays the
role of radius 1 in the covering argument.  Quantities that the argument
states at unit scale (``R_eps``, ``empirical_c``, the admissible epsilon
range) are evaluated on the normalized set ``E / unit_scale`` and scaled
back.  Perimeters are face perimeters throughout, so every certificate is
an exact statement about cell sets.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve
from scipy.spatial import cKDTree

from .lattice import (
    LatticeSet,
    annulus_set,
    ball_set,
    ball_volume,
    c0,
    face_perimeter,
    repair_count,
    translate,
    volume,
)
from .transport import wasserstein_distance, wasserstein_functional

DEFAULT_C_GUESS = 0.01


@dataclass(frozen=True)
class Certificate:
    name: str
    lhs: float
    rhs: float
    slack_allowance: float
    passed: bool
    note: str = ""

    @classmethod
    def check(cls, name, lhs, rhs, slack=0.0, note=""):
        lhs, rhs, slack = float(lhs), float(rhs), float(slack)
        return cls(name, lhs, rhs, slack, bool(lhs <= rhs + slack), note)


def certificates_to_json(certs, **extra) -> str:
    payload = {"all_passed": all(c.passed for c in certs), "certificates": [asdict(c) for c in certs]}
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(frozen=True)
class Component:
    point_ids: tuple[int, ...]
    covered: LatticeSet  # U_j
    piece: LatticeSet  # E_j = E ∩ U_j


@dataclass(frozen=True)
class CoveringResult:
    points: np.ndarray  # physical coordinates, one row per point
    unit_scale: float
    slice_radius: float
    covered_union: LatticeSet
    components: list[Component]
    residual: LatticeSet
    epsilon: float
    empirical_c: float
    point_cells: np.ndarray = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return len(self.points)


def _normalized(E: LatticeSet, unit_scale: float):
    d = E.dim
    return volume(E) / unit_scale ** d, face_perimeter(E) / unit_scale ** (d - 1)


def admissible_epsilon(E: LatticeSet, unit_scale: float, c_guess: float = DEFAULT_C_GUESS) -> float:
    """Largest admissible epsilon (physical volume) for the covering step."""
    d = E.dim
    vol_n, per_n = _normalized(E, unit_scale)
    return min(vol_n, per_n / (2 * d * c_guess)) * unit_scale ** d


def default_unit_scale(E: LatticeSet) -> float:
    return volume(E) ** (1 / E.dim) / 2


def _window(E: LatticeSet, radius: float):
    pad = int(math.ceil(radius / E.spacing)) + 1
    W = E.cropped().padded(pad)
    idx = np.indices(W.shape).reshape(W.dim, -1).T + np.asarray(W.origin)
    return W, idx


def _disk_kernel(radius_cells: float, d: int) -> np.ndarray:
    r = int(math.floor(radius_cells))
    ax = np.arange(-r, r + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return (sum(g.astype(float) ** 2 for g in grids) <= radius_cells ** 2 + 1e-9).astype(float)


def _assemble(E: LatticeSet, point_cells: np.ndarray, unit_scale: float, r: float, epsilon: float,
              empirical_c: float) -> CoveringResult:
    """Covered union ``{f <= r}``, its components and the residual for a fixed point family."""
    h, d = E.spacing, E.dim
    W, idx = _window(E, r)
    centers = (idx + 0.5) * h
    pts = (point_cells + 0.5) * h
    dist, owner = cKDTree(pts).query(centers)
    occ = W.occupancy.ravel()
    inU = dist <= r + 1e-9 * h
    U = LatticeSet.from_cells(idx[inU], h, d)
    residual = LatticeSet.from_cells(idx[occ & ~inU], h, d) if (occ & ~inU).any() else LatticeSet.empty(d, h)

    # union-find over points: overlapping balls or face-adjacent E-cells
    k = len(pts)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def join(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for a, b in cKDTree(pts).query_pairs(2 * r + 1e-9 * h):
        join(a, b)
    lab = np.full(W.shape, -1, dtype=np.int64)
    inE = occ & inU
    lab.reshape(-1)[inE] = owner[inE]
    for ax in range(d):
        a = np.moveaxis(lab, ax, 0)
        x, y = a[:-1], a[1:]
        both = (x >= 0) & (y >= 0) & (x != y)
        for i, j in set(zip(x[both].tolist(), y[both].tolist())):
            join(i, j)

    roots = [find(i) for i in range(k)]
    groups: dict[int, list[int]] = {}
    for i, rt in enumerate(roots):
        groups.setdefault(rt, []).append(i)
    comp_of_point = np.array(roots)
    components = []
    for rt in sorted(groups):
        ids = tuple(groups[rt])
        mask_U = inU & np.isin(comp_of_point[owner], [rt])
        mask_E = mask_U & occ
        components.append(Component(
            point_ids=ids,
            covered=LatticeSet.from_cells(idx[mask_U], h, d),
            piece=LatticeSet.from_cells(idx[mask_E], h, d) if mask_E.any() else LatticeSet.empty(d, h),
        ))
    return CoveringResult(
        points=pts, unit_scale=unit_scale, slice_radius=r, covered_union=U,
        components=components, residual=residual, epsilon=epsilon,
        empirical_c=empirical_c, point_cells=point_cells,
    )


def nucleation_cover(E: LatticeSet, epsilon: float, unit_scale: float | None = None,
                     c_guess: float = DEFAULT_C_GUESS) -> CoveringResult:
    """Greedy family of points, pairwise more than ``2 unit_scale`` apart, whose
    ``2 unit_scale``-balls leave less than ``epsilon`` of ``E`` uncovered."""
    if E.is_empty():
        raise ValueError("cannot cover an empty set")
    h, d = E.spacing, E.dim
    u = default_unit_scale(E) if unit_scale is None else float(unit_scale)
    if not u > 2 * h:
        raise ValueError(f"unit_scale {u} must exceed 2h = {2 * h}")
    eps_max = admissible_epsilon(E, u, c_guess)
    if not 0 < epsilon <= eps_max * (1 + 1e-12):
        raise ValueError(f"epsilon {epsilon} outside (0, {eps_max}] for c_guess={c_guess}")

    W, idx = _window(E, u)
    occ = W.occupancy
    density = np.rint(fftconvolve(occ.astype(float), _disk_kernel(u / h, d), mode="same")).astype(np.int64)
    density = density.ravel()
    avail = np.ones(density.size, dtype=bool)
    uncovered = occ.ravel().copy()
    ucells = idx.astype(float)
    chosen = []
    two_u = 2 * u / h
    while uncovered.sum() * h ** d >= epsilon:
        score = np.where(avail, density, -1)
        j = int(np.argmax(score))
        assert score[j] > 0, "nucleation ran out of candidates before reaching the residual target"
        chosen.append(idx[j])
        near = np.sqrt(((ucells - idx[j]) ** 2).sum(axis=1)) <= two_u + 1e-9
        avail &= ~near
        uncovered &= ~near
    point_cells = np.array(chosen, dtype=np.int64)
    vol_n, per_n = _normalized(E, u)
    eps_n = epsilon / u ** d
    emp_c = (per_n / eps_n) * (vol_n / len(chosen)) ** (1 / d)
    return _assemble(E, point_cells, u, 2 * u, epsilon, emp_c)


def distance_to_points(E: LatticeSet, cover: CoveringResult) -> np.ndarray:
    """``f`` evaluated at the cell centers of ``E``, in ``E.cells()`` order."""
    dist, _ = cKDTree(cover.points).query(E.centers())
    return np.atleast_1d(dist)


def slice_radii(cover: CoveringResult, h: float) -> np.ndarray:
    u = cover.unit_scale
    K = int(math.floor(u / h + 1e-9))
    return 2 * u + h * np.arange(K + 1)


def slice_profile(E: LatticeSet, cover: CoveringResult) -> tuple[np.ndarray, np.ndarray]:
    """Discrete coarea density ``vol(E ∩ {r < f <= r+h}) / h`` for every scanned ``r``."""
    h, d = E.spacing, E.dim
    f = distance_to_points(E, cover)
    radii = slice_radii(cover, h)
    tol = 1e-9 * h
    lo = np.searchsorted(np.sort(f), radii + tol, side="left")
    hi = np.searchsorted(np.sort(f), radii + h + tol, side="left")
    return radii, (hi - lo) * h ** d / h


def select_slice_radius(E: LatticeSet, cover: CoveringResult) -> tuple[float, float]:
    radii, prof = slice_profile(E, cover)
    k = int(np.argmin(prof))
    return float(radii[k]), float(prof[k])


def with_slice_radius(E: LatticeSet, cover: CoveringResult, r: float) -> CoveringResult:
    return _assemble(E, cover.point_cells, cover.unit_scale, r, cover.epsilon, cover.empirical_c)


def r_eps(vol: float, perim: float, epsilon: float, c: float, d: int) -> float:
    """Container radius at unit scale from volume, perimeter, epsilon and the covering constant."""
    X = perim / (c * epsilon)
    return (6 * X ** d + c0(d) * X ** (d - 1)) * vol + (2 * epsilon / ball_volume(d)) ** (1 / d)


@dataclass(frozen=True)
class PackingLayout:
    container_radius: float
    balls: list[tuple[tuple[float, ...], float]]
    residual_center: tuple[float, ...] | None
    residual_radius: float
    s_eps: float = 0.0
    t_eps: float = 0.0
    gap: float = 0.0


def pack_balls(radii, residual_radius: float, gap: float, dim: int = 2) -> PackingLayout:
    """Closed balls in a row along the first axis, consecutive ones ``gap`` apart,
    the whole row centered at the origin."""
    radii = [float(r) for r in radii]
    if any(r < 0 for r in radii) or residual_radius < 0:
        raise ValueError("radii must be non-negative")
    row = radii + ([float(residual_radius)] if residual_radius > 0 else [])
    if not row:
        return PackingLayout(0.0, [], None, 0.0, gap=gap)
    length = 2 * sum(row) + gap * (len(row) - 1)
    x = -length / 2
    centers = []
    for r in row:
        centers.append((x + r,) + (0.0,) * (dim - 1))
        x += 2 * r + gap
    balls = list(zip(centers[: len(radii)], radii))
    res_c = centers[-1] if residual_radius > 0 else None
    return PackingLayout(length / 2 + gap / 2, balls, res_c, float(residual_radius), gap=gap)


@dataclass(frozen=True)
class Rearrangement:
    E_t: LatticeSet
    F_t: LatticeSet
    certificates: list[Certificate]
    cover: CoveringResult
    layout: PackingLayout
    slice_measure: float
    r_eps: float

    def __iter__(self):
        return iter((self.E_t, self.F_t, self.certificates))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)


def _radius_about(S: LatticeSet, center) -> float:
    if S.is_empty():
        return 0.0
    return float(np.sqrt(((S.centers() - np.asarray(center)) ** 2).sum(axis=1)).max())


def _residual_pair(n0: int, h: float, d: int):
    """Concentric ball and annulus of ``n0`` cells each, about the center of cell 0."""
    y0 = np.full(d, 0.5 * h)
    w = ball_volume(d)
    vol0 = n0 * h ** d
    s = (vol0 / w) ** (1 / d)
    t = (2 * vol0 / w) ** (1 / d)
    E0 = repair_count(ball_set(y0, s, h, d), n0)
    F0 = annulus_set(y0, s, t, h, d) - E0
    if F0.is_empty():
        F0 = repair_count(E0, n0 + 1) - E0
    F0 = repair_count(F0, n0, forbidden=E0)
    return E0, F0, y0, s, t


def rearrange(E: LatticeSet, F: LatticeSet, p: float, epsilon: float, unit_scale: float | None = None,
              c_guess: float = DEFAULT_C_GUESS) -> Rearrangement:
    """Cut ``E`` along a cheap slice, pair every piece with its own optimal target
    and pack the pairs, plus a ball/annulus stand-in for the residual, into
    disjoint balls around the origin."""
    E._check_compatible(F)
    if E.count != F.count:
        raise ValueError("E and F must have equal cell counts")
    if (E & F).count:
        raise ValueError("E and F must be disjoint")
    h, d = E.spacing, E.dim
    u = default_unit_scale(E) if unit_scale is None else float(unit_scale)

    cover = nucleation_cover(E, epsilon, u, c_guess)
    r, slice_m = select_slice_radius(E, cover)
    cover = with_slice_radius(E, cover, r)

    pieces = []
    for comp in cover.components:
        if comp.piece.is_empty():
            continue
        res = wasserstein_functional(comp.piece, p)
        anchor = cover.points[comp.point_ids[0]]
        rad = max(_radius_about(comp.piece, anchor), _radius_about(res.target_set, anchor))
        pieces.append((comp, res, anchor, rad))

    n0 = cover.residual.count
    round_pad = h * math.sqrt(d) / 2
    gap = 2 * h
    if n0:
        E0, F0, y0, s, t = _residual_pair(n0, h, d)
        res_rad = max(_radius_about(E0, y0), _radius_about(F0, y0)) + round_pad
    else:
        E0 = F0 = None
        s = t = 0.0
        res_rad = 0.0
    layout = pack_balls([pc[3] + round_pad for pc in pieces], res_rad, gap, d)
    layout = replace(layout, s_eps=s, t_eps=t)

    e_parts, f_parts = [], []
    for (comp, res, anchor, _), (center, _) in zip(pieces, layout.balls):
        v = np.rint((np.asarray(center) - anchor) / h).astype(np.int64)
        e_parts.append(translate(comp.piece, v))
        f_parts.append(translate(res.target_set, v))
    if n0:
        v = np.rint((np.asarray(layout.residual_center) - y0) / h).astype(np.int64)
        e_parts.append(translate(E0, v))
        f_parts.append(translate(F0, v))

    E_t = _union_all(e_parts, d, h)
    F_t = _union_all(f_parts, d, h)
    assert sum(x.count for x in e_parts) == E_t.count, "translated pieces overlap"

    # certificates
    certs = []
    certs.append(Certificate.check(
        "volume", abs(E_t.count - E.count) + abs(F_t.count - F.count), 0.0,
        note="cell-count differences of E and F"))
    certs.append(Certificate.check("disjointness", (E_t & F_t).count * h ** d, 0.0))

    w = ball_volume(d)
    resid_gap = 0.0
    if n0:
        resid_gap = max(0.0, face_perimeter(E0) - 2 * d * n0 ** ((d - 1) / d) * h ** (d - 1))
    certs.append(Certificate.check(
        "perimeter", face_perimeter(E_t), face_perimeter(E) + 2 * epsilon / u,
        2 * (2 * d - 1) * slice_m + resid_gap,
        note="face perimeter; slack = face-count factor on the slice plus residual-ball rounding"))

    w_EF = wasserstein_distance(E, F, p).value
    w_t = wasserstein_distance(E_t, F_t, p).value
    vol = volume(E)
    certs.append(Certificate.check(
        "wasserstein", w_t, w_EF + (2 / w) ** (1 / d) * epsilon ** (1 / p + 1 / d),
        3 * h * vol ** (1 / p)))
    piece_sum = math.fsum(pc[1].plan.total_cost for pc in pieces)
    certs.append(Certificate.check(
        "piece_transport_sum", piece_sum, w_EF ** p, 1e-9 * max(1.0, w_EF ** p),
        note="sum of per-piece optimal costs against the cost of the given pair"))

    vol_n, per_n = _normalized(E, u)
    R = r_eps(vol_n, per_n, epsilon / u ** d, cover.empirical_c, d) * u
    both = E_t | F_t
    reach = float(np.sqrt((both.centers() ** 2).sum(axis=1)).max())
    k = len(layout.balls) + (1 if n0 else 0)
    certs.append(Certificate.check(
        "containment", reach, R, k * (gap + 3 * h * math.sqrt(d)) + cover.n_points * h,
        note="R_eps evaluated with the empirical covering constant"))
    return Rearrangement(E_t, F_t, certs, cover, layout, slice_m, R)


def _union_all(parts, d, h):
    cells = [P.cells() for P in parts if not P.is_empty()]
    if not cells:
        return LatticeSet.empty(d, h)
    return LatticeSet.from_cells(np.vstack(cells), h, d)
