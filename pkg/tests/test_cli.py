"""Tests for the command-line entry point."""

import json

import pytest

from fluxgap.main import main

ANNULUS = {
    "name": "annulus",
    "domain": {
        "outer": {"disk": {"center": [0, 0], "r": 2}},
        "holes": [{"disk": {"center": [0, 0], "r": 1}}],
    },
    "potential": {"poles": [{"at": [0, 0], "flux": 0.5}]},
    "mesh": {"kind": "polar", "ladder": [0.2]},
}


def _scenario(tmp_path, **overrides):
    data = {**ANNULUS, **overrides}
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_oracle_command(capsys):
    assert main(["oracle", "--r1", "1", "--r2", "2", "--phi", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "lambda1 =" in out
    assert out.splitlines()[0].split() == ["k", "eigenvalue"]


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--config", _scenario(tmp_path)]) == 0
    assert "single_hole_width" in capsys.readouterr().out
    assert main(["verify", "--config", _scenario(tmp_path, rhs_scale=100.0)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_writes_the_report(tmp_path):
    config = _scenario(tmp_path, outputs={"json": "report.json"})
    out_dir = tmp_path / "results"
    assert main(["verify", "--config", config, "--out-dir", str(out_dir)]) == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert {b["name"] for b in report["bounds"]} >= {"single_hole_width", "multi_hole"}


def test_sweep_prints_csv(tmp_path, capsys):
    config = _scenario(tmp_path, sweep={"axis": "flux", "values": [0.25, 0.75]}, outputs={"csv": "sweep.csv"})
    assert main(["sweep", "--config", config, "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("value,status,lambda1")
    assert (tmp_path / "sweep.csv").read_text() == out


def test_invariants_command(tmp_path, capsys):
    path = tmp_path / "frame.json"
    path.write_text(
        json.dumps(
            {
                "outer": {"polygon": [[-2, -2], [2, -2], [2, 2], [-2, 2]]},
                "holes": [{"polygon": [[-1, -1], [1, -1], [1, 1], [-1, 1]]}],
            }
        )
    )
    assert main(["invariants", "--config", str(path)]) == 0
    rows = dict(line.split()[:2] for line in capsys.readouterr().out.splitlines()[2:])
    assert float(rows["area"]) == pytest.approx(16.0)
    assert float(rows["beta"]) == pytest.approx(1.0)


def test_partition_svg(tmp_path):
    svg_path = tmp_path / "frame.svg"
    assert main(["partition", "--config", _scenario(tmp_path), "--svg", str(svg_path)]) == 0
    assert svg_path.read_text().lstrip().startswith("<svg")


def test_missing_config(capsys):
    assert main(["verify"]) == 2
    assert "needs --config" in capsys.readouterr().err


def test_bad_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["verify", "--config", str(path)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_invalid_domain(tmp_path, capsys):
    config = _scenario(tmp_path, domain={"outer": {"disk": {"center": [0, 0], "r": -1}}, "holes": []})
    assert main(["verify", "--config", config]) == 2
    assert "error:" in capsys.readouterr().err
