"""``ptlab`` command line.

JSON results go to stdout and logs to stderr.  Exit codes: 0 ok, 1 a
certificate or suite failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import DEFAULT_C_GUESS, admissible_epsilon, default_unit_scale, rearrange
from .gridio import GridFormatError, read_lgrid, write_lgrid
from .lattice import LatticeSet
from .reduction import energy_T, truncation_scan, try_split_improvement
from .search import AnnealConfig, equal_intervals_oracle, sweep
from .transport import TransportError, wasserstein_functional
from .verify import SUITE_NAMES, run_suite

log = logging.getLogger("ptlab")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float = 0.0

    def digest(self) -> str:
        body = asdict(self)
        body.pop("wall_time")
        body.pop("outputs")
        return hashlib.sha256(json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return asdict(self) | {"hash": self.digest()}


def _load(path, args, flag="--grid") -> LatticeSet:
    if path is None:
        raise InputError(f"{flag} is required")
    try:
        S = read_lgrid(path)
    except (OSError, GridFormatError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if S.is_empty():
        raise InputError(f"{path}: empty grid")
    if args.dim is not None and S.dim != args.dim:
        raise InputError(f"{path}: grid is {S.dim}D but --dim {args.dim}")
    if args.spacing is not None and not np.isclose(S.spacing, args.spacing, rtol=1e-12):
        raise InputError(f"{path}: grid spacing {S.spacing} but --spacing {args.spacing}")
    return S


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(man: RunManifest, result, out: Path | None, t0: float) -> None:
    man.wall_time = time.perf_counter() - t0
    payload = {"manifest": man.to_dict(), "result": result}
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(man.to_dict(), indent=2, sort_keys=True) + "\n")
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(type(x).__name__)


def _write_json(path: Path, obj, man: RunManifest, key: str):
    path.write_text(json.dumps({"manifest_hash": man.digest(), **obj}, indent=2, sort_keys=True,
                               default=_jsonable) + "\n")
    man.outputs[key] = str(path)


# ---------------------------------------------------------------------------
# commands

def cmd_energy(args) -> int:
    t0 = time.perf_counter()
    E = _load(args.grid, args)
    man = RunManifest("energy", {"p": args.p, "d": E.dim, "h": E.spacing}, {"grid": _sha(args.grid)})
    rep = energy_T(E, args.p)
    _finish(man, rep.to_dict(), _out_dir(args), t0)
    return EXIT_OK


def cmd_wfun(args) -> int:
    t0 = time.perf_counter()
    E = _load(args.grid, args)
    man = RunManifest("wfun", {"p": args.p, "d": E.dim, "h": E.spacing}, {"grid": _sha(args.grid)})
    res = wasserstein_functional(E, args.p)
    out = _out_dir(args)
    if out is not None:
        write_lgrid(res.target_set, out / "F.lgrid")
        man.outputs["F"] = str(out / "F.lgrid")
        (out / "plan.csv").write_text(f"# manifest {man.digest()}\n" + res.plan.to_csv())
        man.outputs["plan"] = str(out / "plan.csv")
    summary = {
        "value": res.value,
        "cost": res.total_cost,
        "cells": E.count,
        "max_displacement": res.max_displacement,
        "window_radius": res.window_radius,
        "overlap_cells": int((E & res.target_set).count),
        "certified": res.certified,
    }
    _finish(man, summary, out, t0)
    return EXIT_OK


def cmd_rearrange(args) -> int:
    t0 = time.perf_counter()
    E = _load(args.grid, args)
    F = _load(args.grid_f, args, "--grid-f")
    u = default_unit_scale(E) if args.unit_scale is None else args.unit_scale
    eps = args.epsilon if args.epsilon is not None else 0.5 * admissible_epsilon(E, u, args.c_guess)
    man = RunManifest("rearrange", {"p": args.p, "d": E.dim, "h": E.spacing, "epsilon": eps,
                                    "c_guess": args.c_guess, "unit_scale": u},
                      {"grid": _sha(args.grid), "grid_f": _sha(args.grid_f)})
    try:
        R = rearrange(E, F, args.p, eps, unit_scale=u, c_guess=args.c_guess)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = _out_dir(args)
    result = {
        "all_passed": R.passed,
        "certificates": [asdict(c) for c in R.certificates],
        "points": R.cover.n_points,
        "slice_radius": R.cover.slice_radius,
        "r_eps": R.r_eps,
    }
    if out is not None:
        write_lgrid(R.E_t, out / "E_t.lgrid")
        write_lgrid(R.F_t, out / "F_t.lgrid")
        man.outputs.update(E_t=str(out / "E_t.lgrid"), F_t=str(out / "F_t.lgrid"))
        _write_json(out / "certificates.json", result, man, "certificates")
    _finish(man, result, out, t0)
    for c in R.certificates:
        if not c.passed:
            log.error("certificate %s failed: %.6g > %.6g + %.6g", c.name, c.lhs, c.rhs, c.slack_allowance)
    return EXIT_OK if R.passed else EXIT_FAIL


def cmd_improve(args) -> int:
    t0 = time.perf_counter()
    G = _load(args.grid, args)
    params = {"p": args.p, "d": G.dim, "h": G.spacing, "eps_threshold": args.eps_threshold, "mode": args.mode}
    inputs = {"grid": _sha(args.grid)}
    out = _out_dir(args)
    if args.mode == "partition":
        G2 = _load(args.part, args, "--part")
        inputs["part"] = _sha(args.part)
        man = RunManifest("improve", params, inputs)
        try:
            outcome = try_split_improvement(G, G - G2, G2, args.p, args.eps_threshold)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        result = outcome.summary()
    else:
        params["center"] = args.center
        man = RunManifest("improve", params, inputs)
        try:
            rep = truncation_scan(G, args.p, args.center, args.eps_threshold)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        outcome = rep.improvement
        result = {"verdict": rep.verdict, "center": rep.center, "r": rep.r, "alpha": rep.alpha,
                  "rows": len(rep.rows), "improvement": None if outcome is None else outcome.summary()}
        if out is not None:
            (out / "scan.csv").write_text(f"# manifest {man.digest()}\n" + rep.to_csv())
            man.outputs["scan"] = str(out / "scan.csv")
    if out is not None and outcome is not None and outcome.accepted:
        write_lgrid(outcome.improved, out / "improved.lgrid")
        man.outputs["improved"] = str(out / "improved.lgrid")
    _finish(man, result, out, t0)
    return EXIT_OK


def _anneal_config(args) -> AnnealConfig:
    return AnnealConfig(p=args.p, d=args.dim or 2, m=1.0, h=args.spacing or 0.05,
                        moves_per_temp=args.moves_per_temp, temp_initial=args.temp_initial,
                        temp_decay=args.temp_decay, w_recompute_period=args.w_recompute_period,
                        seed=args.seed, max_temps=args.max_temps)


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = _anneal_config(args)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    man = RunManifest("sweep", cfg.to_dict() | {"m_values": args.m, "restarts": args.restarts,
                                                "inits": args.inits})
    out = _out_dir(args)

    def save_trace(m, kind, seed, trace):
        log.info("m=%g %s seed=%d best_T=%.6g", m, kind, seed, trace.best_T)
        if out is not None:
            path = out / f"trace_m{m:g}_{kind}_s{seed}.csv"
            path.write_text(f"# manifest {man.digest()}\n" + trace.to_csv())
            man.outputs[path.stem] = str(path)

    records = sweep(args.m, cfg.p, cfg.d, cfg, inits=tuple(args.inits), restarts=args.restarts, on_run=save_trace)
    result = {"records": [asdict(r) for r in records]}
    if out is not None:
        _write_json(out / "sweep.json", result | {"config": cfg.to_dict()}, man, "sweep")
    _finish(man, result, out, t0)
    return EXIT_OK


def cmd_oracle1d(args) -> int:
    t0 = time.perf_counter()
    h = args.spacing or 1 / 200
    man = RunManifest("oracle1d", {"m": args.m[0], "p": args.p, "k_max": args.k_max, "h": h, "d": 1})
    try:
        rows, best = equal_intervals_oracle(args.m[0], args.p, args.k_max, h)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _finish(man, {"rows": [asdict(r) for r in rows], "best_k": best}, _out_dir(args), t0)
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get("PTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"PTLAB_THREADS must be an integer, got {raw!r}") from None


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    names = [n for n in SUITE_NAMES if n != "determinism"] if args.suite == "all" else [args.suite]
    man = RunManifest("verify", {"suites": names, "seed": args.seed})
    workers = min(_threads(), len(names))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(run_suite, names, [args.seed] * len(names)))
    else:
        reports = [run_suite(n, args.seed) for n in names]
    out = _out_dir(args)
    for rep in reports:
        log.info("suite %s: %s (%.1fs)", rep.suite, "pass" if rep.passed else "FAIL", rep.elapsed)
        if out is not None:
            path = out / f"{rep.suite}.json"
            path.write_text(rep.to_json() + "\n")
            man.outputs[rep.suite] = str(path)
    result = {"all_passed": all(r.passed for r in reports), "suites": [r.to_dict() for r in reports]}
    _finish(man, result, out, t0)
    return EXIT_OK if result["all_passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, default=1.0, help="transport exponent (>= 1)")
    common.add_argument("--dim", type=int, choices=(1, 2, 3), default=None)
    common.add_argument("--spacing", type=float, default=None, help="lattice spacing h")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="ptlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("energy", parents=[common], help="T = P + W for one grid")
    s.add_argument("--grid")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("wfun", parents=[common], help="optimal disjoint target of one grid")
    s.add_argument("--grid")
    s.set_defaults(func=cmd_wfun)

    s = sub.add_parser("rearrange", parents=[common], help="cut, pack and certify a pair (E, F)")
    s.add_argument("--grid")
    s.add_argument("--grid-f")
    s.add_argument("--epsilon", type=float, default=None, help="default: half the admissible maximum")
    s.add_argument("--c-guess", type=float, default=DEFAULT_C_GUESS)
    s.add_argument("--unit-scale", type=float, default=None)
    s.set_defaults(func=cmd_rearrange)

    s = sub.add_parser("improve", parents=[common], help="split improvement or truncation scan")
    s.add_argument("--grid")
    s.add_argument("--mode", choices=("partition", "scan"), default="scan")
    s.add_argument("--part", help="LGRID of the detached part G2 (partition mode)")
    s.add_argument("--center", choices=("centroid", "fraenkel"), default="centroid")
    s.add_argument("--eps-threshold", type=float, default=0.05)
    s.set_defaults(func=cmd_improve)

    s = sub.add_parser("sweep", parents=[common], help="anneal over a list of volumes")
    s.add_argument("--m", type=float, nargs="+", required=True)
    s.add_argument("--inits", nargs="+", choices=("ball", "random"), default=["ball", "random"])
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--moves-per-temp", type=int, default=500)
    s.add_argument("--temp-initial", type=float, default=0.1)
    s.add_argument("--temp-decay", type=float, default=0.95)
    s.add_argument("--max-temps", type=int, default=60)
    s.add_argument("--w-recompute-period", type=int, default=200)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("oracle1d", parents=[common], help="equal-intervals table in d = 1")
    s.add_argument("--m", type=float, nargs=1, required=True)
    s.add_argument("--k-max", type=int, default=8)
    s.set_defaults(func=cmd_oracle1d)

    s = sub.add_parser("verify", parents=[common], help="run verification suites")
    s.add_argument("--suite", choices=SUITE_NAMES + ("all",), required=True)
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (ValueError, TransportError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
