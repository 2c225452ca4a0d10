"""Verification suites.

Each suite is a seeded, deterministic experiment returning a
:class:`SuiteReport`.  ``to_json`` omits wall time so that repeated runs can
be compared byte for byte.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import brute
from .constructions import admissible_epsilon, default_unit_scale, rearrange
from .fixtures import ball_with_satellite, multi_blob, perturbed_disk, random_blob
from .lattice import (
    LatticeSet,
    ball_set,
    c0,
    face_count,
    isoperimetric_deficit,
    fraenkel_asymmetry,
    rescale,
    volume,
)
from .reduction import ball_candidate, total_T, try_split_improvement
from .search import AnnealConfig, equal_intervals_oracle, sweep
from .transport import overlap_count, wasserstein_functional


@dataclass
class SuiteReport:
    suite: str
    passed: bool
    summary: dict
    cases: list = field(default_factory=list)
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "summary": self.summary, "cases": self.cases}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_num)


def _num(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _case(**kw) -> dict:
    return {k: _num(v) for k, v in kw.items()}


# ---------------------------------------------------------------------------
# corpus

def random_corpus(seed: int = 0, n: int = 50, h: float = 1 / 20) -> list[LatticeSet]:
    """Mixed d = 2 corpus: single blobs of 8 to 24 cells across, every fifth a pair of blobs."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        if i % 5 == 4:
            out.append(multi_blob(rng, h, 2, diameter_cells=8.0, separation=1.5))
        else:
            out.append(random_blob(rng, h, diameter_cells=float(rng.integers(8, 25))))
    return out


# ---------------------------------------------------------------------------
# suites

def suite_scaling(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    h, ell, d = 1 / 30, 2, 2
    cases, ok = [], True
    for i in range(10):
        E = random_blob(rng, h, diameter_cells=30.0)
        L = rescale(E, ell)
        faces_exact = face_count(L) == ell ** (d - 1) * face_count(E) and L.count == ell ** d * E.count
        ok &= faces_exact
        for p in (1.0, 2.0):
            w = wasserstein_functional(E, p).value
            wl = wasserstein_functional(L, p).value
            pred = ell ** (1 + d / p) * w
            dev = abs(wl - pred) / pred
            ok &= dev <= 0.05
            cases.append(_case(set=i, p=p, cells=E.count, diameter_cells=max(E.cropped().shape),
                               w=w, w_scaled=wl, predicted=pred, rel_dev=dev, perimeter_scales_exactly=faces_exact))
    worst = max(c["rel_dev"] for c in cases)
    return SuiteReport("scaling", bool(ok), {"max_rel_dev": worst, "tolerance": 0.05, "ell": ell}, cases)


def suite_bound(seed: int = 0) -> SuiteReport:
    cases, viol = [], 0
    C = c0(2)
    for i, E in enumerate(random_corpus(seed)):
        h, vol = E.spacing, volume(E)
        for p in (1.0, 2.0):
            w = wasserstein_functional(E, p).value
            bound = C * vol ** (1 / p + 1 / 2) + 2 * h * vol ** (1 / p)
            viol += bool(w > bound)
            cases.append(_case(set=i, p=p, volume=vol, w=w, bound=bound, ratio=w / bound))
    return SuiteReport("bound", viol == 0, {"violations": viol, "max_ratio": max(c["ratio"] for c in cases)}, cases)


def suite_displacement(seed: int = 0) -> SuiteReport:
    cases, viol = [], 0
    C = c0(2)
    for i, E in enumerate(random_corpus(seed)):
        h, vol = E.spacing, volume(E)
        limit = C * vol ** 0.5 + 2 * h * math.sqrt(2)
        tree = cKDTree(E.centers())
        for p in (1.0, 2.0):
            res = wasserstein_functional(E, p)
            far = float(tree.query(res.target_set.centers())[0].max())
            wide = wasserstein_functional(E, p, window_scale=1.5).value
            dw = abs(wide - res.value)
            bad = res.max_displacement > limit or far > limit or dw >= 1e-10
            viol += bool(bad)
            cases.append(_case(set=i, p=p, limit=limit, max_displacement=res.max_displacement,
                               farthest_target=far, window_change=dw, passed=not bad))
    return SuiteReport("displacement", viol == 0, {
        "violations": viol,
        "max_displacement_ratio": max(c["max_displacement"] / c["limit"] for c in cases),
        "max_window_change": max(c["window_change"] for c in cases),
    }, cases)


def _integral(E: LatticeSet, res) -> tuple[bool, dict]:
    h, d = E.spacing, E.dim
    F = res.target_set
    masses_ok = bool(np.all(res.plan.mass == h ** d))
    dst = res.plan.dst_cells
    inflow_ok = len(np.unique(dst, axis=0)) == len(dst) and F.count == E.count
    overlap = overlap_count(E, F)
    ok = masses_ok and inflow_ok and overlap == 0
    return ok, dict(overlap_cells=overlap, masses_exact=masses_ok, inflow_binary=inflow_ok)


def suite_integrality(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed + 1)
    corpus = [("blob2d", E) for E in random_corpus(seed)]
    for _ in range(10):
        n = int(rng.integers(1, 60))
        cells = rng.choice(120, size=n, replace=False)
        corpus.append(("scatter1d", LatticeSet.from_cells(cells.reshape(-1, 1), 1 / 40, 1)))
    for k in range(5):
        corpus.append(("ball3d", ball_set(np.full(3, 0.05), 0.15 + 0.03 * k, 0.05, 3)))
    cases, bad = [], 0
    for i, (kind, E) in enumerate(corpus):
        for p in (1.0, 2.0):
            ok, info = _integral(E, wasserstein_functional(E, p))
            bad += not ok
            cases.append(_case(set=i, kind=kind, p=p, cells=E.count, passed=ok, **info))
    return SuiteReport("integrality", bad == 0, {"failures": bad, "runs": len(cases)}, cases)


def suite_rearrange(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    cases, bad = [], 0
    for i in range(10):
        h = 1 / 40
        E = multi_blob(rng, h, 2 + i % 3, diameter_cells=float(rng.integers(10, 16)))
        p = 1.0 if i % 2 == 0 else 2.0
        F = wasserstein_functional(E, p).target_set
        u = default_unit_scale(E)
        eps = 0.5 * admissible_epsilon(E, u)
        R = rearrange(E, F, p, eps, unit_scale=u)
        bad += not R.passed
        cases.append(_case(fixture=i, p=p, cells=E.count, epsilon=eps, points=R.cover.n_points,
                           passed=R.passed)
                     | {"certificates": {c.name: _case(lhs=c.lhs, rhs=c.rhs, slack=c.slack_allowance,
                                                       passed=c.passed) for c in R.certificates}})
    return SuiteReport("rearrange", bad == 0, {"failures": bad}, cases)


def suite_improve(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    h, p = 1 / 50, 1.0
    cases = []
    false_acc = missed = wrong_reject = 0
    for i in range(20):
        small = i < 10
        r = float(rng.uniform(0.22, 0.36))
        gamma = float(rng.uniform(0.01, 0.045)) if small else float(rng.uniform(0.08, 0.5))
        dist = r + float(rng.uniform(0.25, 0.45)) + (2 * gamma) ** 0.5 * r
        G, G1, G2 = ball_with_satellite(h, r, gamma, dist, angle=float(rng.uniform(0, 2 * math.pi)))
        out = try_split_improvement(G, G1, G2, p)
        eligible = out.condition_holds and out.gamma <= 0.05
        t_new = None
        if out.accepted:
            t_new = total_T(out.improved, p)
            false_acc += not (t_new < total_T(G, p) and out.improved.count == G.count)
        if small:
            missed += not (eligible and out.accepted)
        else:
            wrong_reject += out.accepted
        cases.append(_case(fixture=i, group="satisfying" if small else "violating", gamma=out.gamma,
                           condition_lhs=out.condition_lhs, condition_rhs=out.condition_rhs,
                           t_before=out.t_before, t_after_recomputed=t_new, accepted=out.accepted,
                           candidate=out.candidate))
    ok = false_acc == 0 and missed == 0 and wrong_reject == 0
    return SuiteReport("improve", ok, {"false_acceptances": false_acc, "satisfying_not_accepted": missed,
                                       "violating_accepted": wrong_reject}, cases)


ORACLE_CONFIG = AnnealConfig(p=1.0, d=1, m=1.0, h=1 / 200, moves_per_temp=10_000, temp_initial=0.5,
                             temp_decay=0.95, max_temps=80, seed=0, w_recompute_period=10_000)


def suite_oracle1d(seed: int = 0, restarts: int = 4) -> SuiteReport:
    from dataclasses import replace

    cfg = replace(ORACLE_CONFIG, seed=seed)
    ms = (0.5, 1.0, 2.0, 4.0)
    records = sweep(ms, 1.0, 1, cfg, restarts=restarts)
    cases, ok = [], True
    for m in ms:
        rows, k_best = equal_intervals_oracle(m, 1.0, 8, cfg.h)
        t_oracle = min(r.T for r in rows)
        best = min((r for r in records if r.m == m), key=lambda r: (r.best_T, r.init))
        rel = abs(best.best_T - t_oracle) / t_oracle
        good = rel <= 0.02 and best.components == k_best
        ok &= good
        cases.append(_case(m=m, oracle_k=k_best, oracle_T=t_oracle, anneal_T=best.best_T,
                           anneal_components=best.components, init=best.init, rel_err=rel, passed=good))
    return SuiteReport("oracle1d", bool(ok), {"restarts": restarts, "config": cfg.to_dict()}, cases)


def suite_brute(seed: int = 0) -> SuiteReport:
    cases = []
    summary = {}
    ok = True
    groups = [
        ("1d", 1 / 30, [np.array(s).reshape(-1, 1) for s in brute.small_sets_1d(30, 6)], 1),
        ("2d", 1 / 5, list(brute.small_sets_2d(5, 6)), 2),
    ]
    rng = np.random.default_rng(seed)
    for name, h, sets, d in groups:
        worst, fails = 0.0, []
        values = {}
        for idx, cells in enumerate(sets):
            E = LatticeSet.from_cells(cells, h, d)
            for p in (1.0, 2.0):
                ref = brute.brute_force_value(E, p)
                got = wasserstein_functional(E, p).value
                dev = abs(got - ref) / ref
                values[idx, p] = got
                worst = max(worst, dev)
                if dev > 1e-12:
                    fails.append(_case(cells=str(cells.tolist()), p=p, solver=got, brute=ref))
        # placement check: random lattice images of the representatives
        moved_bad = 0
        for idx in rng.choice(len(sets), size=min(200, len(sets)), replace=False):
            cells = sets[idx].copy()
            if d == 2 and rng.random() < 0.5:
                cells = cells[:, ::-1]
            cells = cells * rng.choice([-1, 1], size=d) + rng.integers(-50, 50, size=d)
            E = LatticeSet.from_cells(cells, h, d)
            for p in (1.0, 2.0):
                moved_bad += abs(wasserstein_functional(E, p).value - values[int(idx), p]) > 1e-12 * values[int(idx), p]
        good = not fails and moved_bad == 0
        ok &= good
        summary[name] = _case(classes=len(sets), runs=2 * len(sets), max_rel_dev=worst, failures=len(fails),
                              moved_mismatches=moved_bad)
        cases.extend(fails[:20])
    return SuiteReport("brute", bool(ok), summary, cases)


def suite_isoperimetric(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    cases = []
    finite = True
    for i in range(30):
        E = random_blob(rng, 1 / 30, diameter_cells=float(rng.integers(16, 31)))
        delta = fraenkel_asymmetry(E, ball_candidate(E))[0]
        D = isoperimetric_deficit(E)
        ratio = delta / math.sqrt(D) if D > 0 else math.inf
        finite &= math.isfinite(ratio)
        cases.append(_case(kind="random", set=i, asymmetry=delta, deficit=D, ratio=ratio))
    fam = []
    for k in range(6):
        a = 0.3 * 0.7 ** k
        E = perturbed_disk(1 / 100, 0.4, a)
        delta = fraenkel_asymmetry(E, ball_candidate(E))[0]
        D = isoperimetric_deficit(E)
        fam.append((a, delta, D, delta / math.sqrt(D) if D > 0 else math.inf))
        cases.append(_case(kind="family", amplitude=a, asymmetry=delta, deficit=D, ratio=fam[-1][3]))
    deltas = [f[1] for f in fam]
    defs = [f[2] for f in fam]
    ratios = [f[3] for f in fam]
    shrinking = all(x > y for x, y in zip(deltas, deltas[1:])) and all(x > y for x, y in zip(defs, defs[1:]))
    head = max(ratios[:3])
    bounded = all(math.isfinite(r) for r in ratios) and max(ratios[3:]) <= 1.1 * head
    random_max = max(c["ratio"] for c in cases if c["kind"] == "random" and isinstance(c["ratio"], float))
    ok = finite and shrinking and bounded
    return SuiteReport("isoperimetric", bool(ok), _case(random_ratio_max=random_max, all_finite=finite,
                                                        family_shrinking=shrinking, family_tail_bounded=bounded,
                                                        family_head_max=head), cases)


SUITES = {
    "scaling": suite_scaling,
    "bound": suite_bound,
    "displacement": suite_displacement,
    "integrality": suite_integrality,
    "rearrange": suite_rearrange,
    "improve": suite_improve,
    "oracle1d": suite_oracle1d,
    "brute": suite_brute,
    "isoperimetric": suite_isoperimetric,
}


def run_suite(name: str, seed: int = 0) -> SuiteReport:
    if name == "determinism":
        return suite_determinism(seed)
    if name not in SUITES:
        raise KeyError(name)
    t0 = time.perf_counter()
    rep = SUITES[name](seed)
    rep.elapsed = time.perf_counter() - t0
    return rep


def suite_determinism(seed: int = 0, names=None) -> SuiteReport:
    names = list(SUITES) if names is None else list(names)
    cases, ok = [], True
    for name in names:
        a = run_suite(name, seed).to_json()
        b = run_suite(name, seed).to_json()
        same = a == b
        ok &= same
        cases.append({"suite": name, "identical": same, "bytes": len(a)})
    return SuiteReport("determinism", bool(ok), {"suites": names}, cases)


SUITE_NAMES = tuple(SUITES) + ("determinism",)
