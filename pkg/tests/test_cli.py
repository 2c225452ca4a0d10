import json

import numpy as np
import pytest

from ptlab.cli import main
from ptlab.fixtures import ball_with_satellite
from ptlab.gridio import dumps, write_lgrid
from ptlab.lattice import LatticeSet, ball_set


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.fixture
def grids(tmp_path):
    paths = {}
    paths["one"] = tmp_path / "one.lgrid"
    write_lgrid(LatticeSet.from_cells([(0, 0)], 1, 2), paths["one"])
    paths["empty"] = tmp_path / "empty.lgrid"
    write_lgrid(LatticeSet.empty(2, 1), paths["empty"])
    paths["disk"] = tmp_path / "disk.lgrid"
    write_lgrid(ball_set([0.025, 0.025], 0.5 ** 0.5 / np.sqrt(np.pi), 1 / 40, 2), paths["disk"])
    G, G1, G2 = ball_with_satellite(1 / 50, 0.3, 0.02, 0.75)
    paths["G"], paths["G2"] = tmp_path / "G.lgrid", tmp_path / "G2.lgrid"
    write_lgrid(G, paths["G"])
    write_lgrid(G2, paths["G2"])
    paths["bad"] = tmp_path / "bad.lgrid"
    paths["bad"].write_text("garbage\n")
    return paths


def test_energy_single_cell(capsys, grids):
    code, out = _run(capsys, "energy", "--grid", str(grids["one"]), "--p", "1")
    assert code == 0
    assert out["result"]["total_T"] == 5
    assert len(out["manifest"]["hash"]) == 16


def test_energy_disk_under_bound(capsys, grids):
    code, out = _run(capsys, "energy", "--grid", str(grids["disk"]), "--p", "2")
    from ptlab.lattice import c0

    r = out["result"]
    assert r["w_functional"] <= c0(2) * r["volume"] ** (1 / 2 + 1 / 2)


@pytest.mark.parametrize("name", ["empty", "bad"])
def test_input_errors_exit_2(capsys, grids, name):
    code, out = _run(capsys, "energy", "--grid", str(grids[name]))
    assert code == 2 and out is None


def test_dim_mismatch_exit_2(capsys, grids):
    assert _run(capsys, "energy", "--grid", str(grids["one"]), "--dim", "3")[0] == 2


def test_wfun_dump(capsys, grids, tmp_path):
    code, out = _run(capsys, "wfun", "--grid", str(grids["one"]), "--p", "2", "--out", str(tmp_path / "w"))
    assert code == 0
    assert out["result"]["value"] == 1.0 and out["result"]["overlap_cells"] == 0
    F = (tmp_path / "w" / "F.lgrid").read_text()
    assert F.count("1") >= 1
    assert json.loads((tmp_path / "w" / "manifest.json").read_text())["hash"] == out["manifest"]["hash"]


def test_rearrange_certificates(capsys, grids, tmp_path):
    _run(capsys, "wfun", "--grid", str(grids["G"]), "--out", str(tmp_path / "f"))
    code, out = _run(capsys, "rearrange", "--grid", str(grids["G"]), "--grid-f", str(tmp_path / "f" / "F.lgrid"),
                     "--out", str(tmp_path / "r"))
    assert code == 0 and out["result"]["all_passed"]
    saved = json.loads((tmp_path / "r" / "certificates.json").read_text())
    assert saved["manifest_hash"] == out["manifest"]["hash"]


def test_rearrange_overlap_is_input_error(capsys, grids):
    assert _run(capsys, "rearrange", "--grid", str(grids["G"]), "--grid-f", str(grids["G"]))[0] == 2


def test_improve_modes(capsys, grids):
    code, out = _run(capsys, "improve", "--grid", str(grids["G"]), "--mode", "partition", "--part", str(grids["G2"]))
    assert code == 0 and out["result"]["accepted"]
    code, out = _run(capsys, "improve", "--grid", str(grids["G"]), "--mode", "scan")
    assert code == 0 and out["result"]["verdict"] == "case1"


def test_oracle1d(capsys):
    code, out = _run(capsys, "oracle1d", "--m", "1", "--p", "1", "--k-max", "8")
    assert code == 0
    assert [r["perimeter"] for r in out["result"]["rows"]] == [2.0 * k for k in range(1, 9)]


def test_sweep_writes_traces(capsys, tmp_path):
    code, out = _run(capsys, "sweep", "--m", "0.5", "--dim", "1", "--spacing", "0.02", "--max-temps", "3",
                     "--out", str(tmp_path / "s"))
    assert code == 0
    assert {r["init"] for r in out["result"]["records"]} == {"ball", "random"}
    assert len(list((tmp_path / "s").glob("trace_*.csv"))) == 2


def test_verify_unknown_suite_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "nope"])
    assert exc.value.code == 2


def test_verify_suite_passes(capsys):
    code, out = _run(capsys, "verify", "--suite", "isoperimetric")
    assert code == 0 and out["result"]["all_passed"]


def test_commands_are_deterministic(capsys, grids):
    a = _run(capsys, "energy", "--grid", str(grids["G"]))[1]
    b = _run(capsys, "energy", "--grid", str(grids["G"]))[1]
    a["manifest"].pop("wall_time"), b["manifest"].pop("wall_time")
    assert a == b


def test_grid_roundtrip_through_read_path(grids, tmp_path):
    from ptlab.gridio import read_lgrid

    text = grids["G"].read_text()
    assert dumps(read_lgrid(grids["G"])) == text
