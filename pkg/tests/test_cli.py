import json

import pytest

from bacnoma.cli import main
from bacnoma.model import two_device_scenario


def test_two_device_command(capsys, tmp_path):
    out = tmp_path / "study.json"
    assert main(["fig3", "--steps", "200", "--out", str(out)]) == 0
    assert "eta" in capsys.readouterr().out
    data = json.loads(out.read_text())
    assert data["lp"]["status"] == "Optimal"


def test_solve(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    two_device_scenario().dump(cfg)
    out = tmp_path / "res.json"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    assert "downlink" in capsys.readouterr().out
    assert json.loads(out.read_text())["result"]["status"] == "Optimal"


def test_solve_missing_field(tmp_path, capsys):
    d = two_device_scenario().to_dict()
    del d["p_max"]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(d))
    assert main(["solve", "--config", str(cfg)]) == 2
    assert "p_max" in capsys.readouterr().err


def test_solve_needs_config(capsys):
    assert main(["solve"]) == 2


def test_solve_infeasible(tmp_path, capsys):
    # A 60 BPCU downlink target is out of reach.
    cfg = tmp_path / "cfg.json"
    two_device_scenario(r0=60.0).dump(cfg)
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "QoS" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["solve", "--config", "/nonexistent/cfg.json"]) == 2


def test_bad_command(capsys):
    assert main(["frobnicate"]) == 2


def test_bad_scheme(capsys):
    assert main(["sweep-m", "--scheme", "tdma"]) == 2


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "m.csv"
    rc = main(["sweep-m", "--trials", "4", "--values", "2,3", "--scheme", "noma_optimal,oma_roundrobin", "--out", str(out), "--quiet"])
    assert rc == 0
    assert capsys.readouterr().out == ""
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    meta = json.loads((tmp_path / "m.csv.meta.json").read_text())
    assert meta["spec"]["trials"] == 4 and meta["notes"]


def test_sweep_alpha(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["sweep-alpha", "--trials", "3", "--values", "0.01,0.5", "--out", str(out), "--quiet"]) == 0
    assert out.read_text().count("\n") == 1 + 2 * 3


@pytest.mark.parametrize("cmd", [["selftest"], ["oracle-check", "--trials", "10", "--steps", "200"]])
def test_checks_pass(cmd, capsys):
    assert main(cmd) == 0
    assert "FAIL" not in capsys.readouterr().out
