"""Acceptance criteria 1 to 10.  Each test prints one PASS/FAIL line."""
import json

import pytest

from ptlab.verify import SUITES, run_suite

SEED = 0
CRITERIA = {
    1: ("scaling", 300),
    2: ("bound", 600),
    3: ("displacement", None),
    4: ("integrality", None),
    5: ("rearrange", 900),
    6: ("improve", None),
    7: ("oracle1d", 600),
    8: ("brute", 300),
    9: ("isoperimetric", None),
}

_reports = {}


def _report(name):
    if name not in _reports:
        _reports[name] = run_suite(name, SEED)
    return _reports[name]


def _line(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n:2d} {'PASS' if ok else 'FAIL'}  {detail}")


def _check(capsys, n):
    name, limit = CRITERIA[n]
    rep = _report(name)
    in_time = limit is None or rep.elapsed <= limit
    detail = f"{name}: {json.dumps(rep.summary, sort_keys=True, default=str)[:300]} ({rep.elapsed:.1f}s)"
    _line(capsys, n, rep.passed and in_time, detail)
    assert rep.passed, rep.to_json()[:4000]
    assert in_time, f"{name} took {rep.elapsed:.1f}s > {limit}s"


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(capsys, n):
    _check(capsys, n)


@pytest.mark.slow
def test_criterion_10_determinism(capsys):
    diffs = []
    for n in sorted(CRITERIA):
        name = CRITERIA[n][0]
        first = _report(name).to_json()
        again = run_suite(name, SEED).to_json()
        if first != again:
            diffs.append(name)
    _line(capsys, 10, not diffs, f"determinism: {len(CRITERIA)} suites rerun, mismatched={diffs}")
    assert not diffs
    assert set(SUITES) == {v[0] for v in CRITERIA.values()}
