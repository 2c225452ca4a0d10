"""Scaling between the lambda- and m-problems, the energy T, split-and-rescale
improvement and the ball-cut truncation scan."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .lattice import (
    LatticeSet,
    ball_set,
    ball_volume,
    euclid_perimeter,
    face_perimeter,
    fraenkel_asymmetry,
    repair_count,
    rescale,
    volume,
)
from .transport import wasserstein_functional

IMPROVE_TOL = 1e-9


def scaling_exponent(p: float, d: int) -> float:
    return 1 / p + 2 / d - 1


def alpha(p: float, d: int) -> float:
    return 2 + d * (1 / p - 1)


def check_admissible(p: float, d: int) -> float:
    """Return alpha; reject p < 1 and pairs with non-positive alpha."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = alpha(p, d)
    if a <= 0:
        raise ValueError(f"alpha = 2 + d(1/p - 1) = {a} <= 0 for p={p}, d={d}; need 1/p + 2/d > 1")
    return a


def _exponent_or_raise(p: float, d: int) -> float:
    a = scaling_exponent(p, d)
    if abs(a) < 1e-12:
        raise ValueError(f"1/p + 2/d = 1 for p={p}, d={d}: lambda does not depend on m, no reformulation")
    return a


def m_to_lambda(m: float, p: float, d: int) -> float:
    if not m > 0:
        raise ValueError("m must be positive")
    return m ** _exponent_or_raise(p, d)


def lambda_to_m(lam: float, p: float, d: int) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return lam ** (1 / _exponent_or_raise(p, d))


@dataclass(frozen=True)
class EnergyReport:
    p: float
    d: int
    volume: float
    face_perimeter: float
    euclid_perimeter: float | None
    w_functional: float
    total_T: float
    equivalent_lambda: float | None
    lambda_scaled_energy: float

    def to_dict(self) -> dict:
        return asdict(self)


def energy_T(E: LatticeSet, p: float, euclid: bool = True) -> EnergyReport:
    """``T(E) = P(E) + W(E)`` with the face perimeter, plus derived quantities."""
    if E.is_empty():
        raise ValueError("energy of an empty set")
    d = E.dim
    m = volume(E)
    P = face_perimeter(E)
    W = wasserstein_functional(E, p).value
    T = P + W
    try:
        lam = m_to_lambda(m, p, d)
    except ValueError:
        lam = None
    return EnergyReport(
        p=float(p),
        d=d,
        volume=m,
        face_perimeter=P,
        euclid_perimeter=euclid_perimeter(E) if euclid and d > 1 else None,
        w_functional=W,
        total_T=T,
        equivalent_lambda=lam,
        lambda_scaled_energy=m ** (1 / d - 1) * T,
    )


def total_T(E: LatticeSet, p: float) -> float:
    return face_perimeter(E) + wasserstein_functional(E, p).value


@dataclass(frozen=True)
class ImprovementOutcome:
    improved: LatticeSet | None
    gamma: float
    ell: float
    condition_lhs: float
    condition_rhs: float
    t_before: float
    t_after: float | None
    accepted: bool
    candidate: str | None = None
    candidates: dict = field(default_factory=dict)

    @property
    def condition_holds(self) -> bool:
        return self.condition_lhs <= self.condition_rhs

    def summary(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("gamma", "ell", "condition_lhs", "condition_rhs", "t_before", "t_after", "accepted", "candidate")}
        out["condition_holds"] = self.condition_holds
        out["candidates"] = dict(self.candidates)
        return out


def _check_partition(G: LatticeSet, G1: LatticeSet, G2: LatticeSet):
    G._check_compatible(G1)
    G._check_compatible(G2)
    if G1.is_empty() or G2.is_empty():
        raise ValueError("partition not exact: both parts must be non-empty")
    if (G1 & G2).count or (G1 | G2) != G:
        raise ValueError("partition not exact: parts overlap or miss cells of G")


def ball_candidate(G: LatticeSet) -> LatticeSet:
    """Digital ball with the cell count of ``G``, centered at the cell nearest the centroid."""
    h, d = G.spacing, G.dim
    c = (np.floor(G.centroid() / h) + 0.5) * h
    r = (volume(G) / ball_volume(d)) ** (1 / d)
    B = ball_set(c, r, h, d)
    if B.is_empty():
        B = LatticeSet.from_cells([np.floor(G.centroid() / h).astype(int)], h, d)
    return repair_count(B, G.count)


def try_split_improvement(G: LatticeSet, G1: LatticeSet, G2: LatticeSet, p: float,
                          eps_threshold: float = 0.05, t_before: float | None = None) -> ImprovementOutcome:
    """Drop ``G2``, inflate ``G1`` back to the volume of ``G`` and keep the result
    if it (or the equal-volume ball) has strictly lower energy."""
    _check_partition(G, G1, G2)
    d = G.dim
    if not volume(G) < min(1.0, ball_volume(d)):
        raise ValueError("vol(G) must be below min(1, omega_d); rescale the input first")
    gamma = G2.count / G1.count
    ell = (1 + gamma) ** (1 / d)
    lhs = face_perimeter(G1) + face_perimeter(G2) - face_perimeter(G)
    rhs = 0.5 * total_T(G2, p)
    T0 = total_T(G, p) if t_before is None else t_before
    base = dict(gamma=gamma, ell=ell, condition_lhs=lhs, condition_rhs=rhs, t_before=T0)
    if not (lhs <= rhs and gamma <= eps_threshold):
        return ImprovementOutcome(None, t_after=None, accepted=False, **base)
    cands = {
        "rescaled": rescale(G1, ell, target_volume=volume(G)),
        "ball": ball_candidate(G),
    }
    energies = {k: total_T(S, p) for k, S in cands.items()}
    name = min(energies, key=lambda k: (energies[k], k))
    if energies[name] < T0 - IMPROVE_TOL:
        return ImprovementOutcome(cands[name], t_after=energies[name], accepted=True, candidate=name,
                                  candidates=energies, **base)
    return ImprovementOutcome(None, t_after=energies[name], accepted=False, candidate=name,
                              candidates=energies, **base)


@dataclass(frozen=True)
class TruncationRow:
    t: float
    cut: float
    tail_T: float | None
    case: str  # "case1", "case2" or "empty"
    tail_volume: float


@dataclass(frozen=True)
class TruncationReport:
    center: tuple[float, ...]
    r: float
    alpha: float
    rows: list[TruncationRow]
    verdict: str  # "case1", "case2" or "contained"
    improvement: ImprovementOutcome | None

    def decay_curve(self) -> np.ndarray:
        d = len(self.center)
        return np.array([[row.t, row.tail_volume ** (1 / d)] for row in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "cut", "tail_T", "case", "tail_volume"])
        for row in self.rows:
            w.writerow([repr(row.t), repr(row.cut), "" if row.tail_T is None else repr(row.tail_T),
                        row.case, repr(row.tail_volume)])
        return buf.getvalue()


def _scan_center(G: LatticeSet, how: str) -> np.ndarray:
    if how == "centroid":
        return G.centroid()
    if how == "fraenkel":
        B = ball_candidate(G)
        _, shift = fraenkel_asymmetry(G, B)
        return B.centroid() + np.asarray(shift) * G.spacing
    raise ValueError(f"unknown center rule {how!r}")


def truncation_scan(G: LatticeSet, p: float, center: str = "centroid",
                    eps_threshold: float = 0.05) -> TruncationReport:
    """Cut ``G`` by balls ``B_t`` for ``t`` in ``[r, 1]`` and classify each cut."""
    if G.is_empty():
        raise ValueError("empty set")
    h, d = G.spacing, G.dim
    a = check_admissible(p, d)
    if not volume(G) <= 1:
        raise ValueError("vol(G) must be <= 1; rescale the input first")
    c = _scan_center(G, center)
    r = (volume(G) / ball_volume(d)) ** (1 / d)
    PG = face_perimeter(G)
    ts = h * np.arange(math.ceil(r / h - 1e-9), math.floor(1 / h + 1e-9) + 1)
    cache: dict[bytes, float] = {}
    rows = []
    chosen = None
    for t in ts:
        inner = G & ball_set(c, float(t), h, d)
        tail = G - inner
        if tail.is_empty():
            rows.append(TruncationRow(float(t), 0.0, None, "empty", 0.0))
            break
        cut = face_perimeter(inner) + face_perimeter(tail) - PG
        key = tail.key()
        if key not in cache:
            cache[key] = face_perimeter(tail) + wasserstein_functional(tail, p).value
        tT = cache[key]
        case = "case1" if cut <= 0.5 * tT else "case2"
        rows.append(TruncationRow(float(t), cut, tT, case, volume(tail)))
        if case == "case1" and not inner.is_empty():
            chosen = (inner, tail)  # keeps the smallest case-1 tail
    improvement = None
    if chosen is not None:
        verdict = "case1"
        improvement = try_split_improvement(G, chosen[0], chosen[1], p, eps_threshold)
    elif rows and rows[-1].case == "empty":
        verdict = "contained"
    else:
        verdict = "case2"
    return TruncationReport(tuple(float(x) for x in c), r, a, rows, verdict, improvement)
