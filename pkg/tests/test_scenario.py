"""Tests for scenario loading, mesh selection, sweeps and result files."""

import csv
import io
import json

import pytest
from pydantic import ValidationError

from fluxgap.core.errors import ScenarioError
from fluxgap.models import MeshSpec, RunRecord, Scenario
from fluxgap.services import oracle
from fluxgap.services import scenario as harness

ANNULUS_DOMAIN = {
    "outer": {"disk": {"center": [0, 0], "r": 2}},
    "holes": [{"disk": {"center": [0, 0], "r": 1}}],
}
HALF_FLUX = {"poles": [{"at": [0, 0], "flux": 0.5}]}
GAP_DOMAIN = {
    "outer": {"polygon": [[-4, 0], [4, 0], [4, 4], [-4, 4]]},
    "holes": [{"polygon": [[-3, 0.1], [3, 0.1], [3, 2], [-3, 2]]}],
}


def _annulus_scenario(**overrides) -> Scenario:
    data = {
        "name": "annulus",
        "domain": ANNULUS_DOMAIN,
        "potential": HALF_FLUX,
        "mesh": {"kind": "polar", "ladder": [0.2]},
    }
    data.update(overrides)
    return Scenario.model_validate(data)


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_load_inline_scenario(tmp_path):
    path = _write(
        tmp_path / "s.json",
        {"domain": ANNULUS_DOMAIN, "potential": HALF_FLUX, "mesh": {"kind": "polar", "ladder": [0.2]}},
    )
    sc = harness.load_scenario(path)
    assert sc.domain.outer.kind == "disk"
    assert sc.potential.poles[0].flux == 0.5
    assert sc.sweep.axis == "none"


def test_domain_path_is_relative_to_the_scenario(tmp_path):
    (tmp_path / "shapes").mkdir()
    _write(tmp_path / "shapes" / "gap.json", GAP_DOMAIN)
    path = _write(
        tmp_path / "s.json",
        {"domain": "shapes/gap.json", "potential": HALF_FLUX, "mesh": {"kind": "rect_diff", "ladder": [0.5]}},
    )
    sc = harness.load_scenario(path)
    assert len(sc.domain.holes) == 1


def test_broken_json_reports_the_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  "domain": \n}\n', encoding="utf-8")
    with pytest.raises(ScenarioError, match="line 4"):
        harness.load_scenario(path)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        harness.load_scenario(tmp_path / "absent.json")


def test_ladder_must_decrease():
    with pytest.raises(ValidationError):
        MeshSpec(kind="polar", ladder=[0.1, 0.2])


def test_hash_is_stable_and_content_sensitive():
    first = harness.scenario_hash(_annulus_scenario())
    assert first == harness.scenario_hash(_annulus_scenario())
    assert first != harness.scenario_hash(_annulus_scenario(name="other"))
    assert len(first) == 64


def test_mesher_must_match_the_domain(square_frame, annulus):
    with pytest.raises(ScenarioError):
        harness.build_mesh(square_frame, MeshSpec(kind="polar", ladder=[0.2]), 0.2)
    with pytest.raises(ScenarioError):
        harness.build_mesh(annulus, MeshSpec(kind="rect_diff", ladder=[0.2]), 0.2)


def test_verify_passes_on_the_annulus():
    report = harness.verify_scenario(_annulus_scenario())
    assert report.passed
    assert report.mesher == "polar"
    expected = oracle.annulus_oracle(1.0, 2.0, 0.5).eigenvalue
    assert report.lambda1 == pytest.approx(expected, rel=5e-2)


def test_scaled_bounds_fail():
    assert not harness.verify_scenario(_annulus_scenario(rhs_scale=100.0)).passed


def test_flux_sweep_is_symmetric():
    sc = _annulus_scenario(sweep={"axis": "flux", "values": [0.75, 0.25, 0.5]})
    record = harness.run_sweep(sc)
    assert [p.value for p in record.points] == [0.25, 0.5, 0.75]
    assert all(p.status == "ok" for p in record.points)
    assert record.points[0].symmetry_residual == pytest.approx(0.0, abs=1e-8)
    assert record.points[1].symmetry_residual == 0.0
    assert record.scenario_hash == harness.scenario_hash(sc)
    assert record.timing is None


def test_parallel_sweep_matches_serial():
    sc = _annulus_scenario(sweep={"axis": "flux", "values": [0.25, 0.5]})
    serial = harness.run_sweep(sc, jobs=1)
    parallel = harness.run_sweep(sc, jobs=2)
    assert [p.lambda1 for p in serial.points] == [p.lambda1 for p in parallel.points]


def test_outputs_are_byte_identical_across_runs_and_workers():
    sc = _annulus_scenario(sweep={"axis": "flux", "values": [0.75, 0.1, 0.5, 0.25]})
    first = harness.run_sweep(sc, jobs=1)
    again = harness.run_sweep(sc, jobs=1)
    pooled = harness.run_sweep(sc, jobs=4)
    csv_text = harness.format_csv(first)
    json_text = harness.to_json(first)
    assert harness.format_csv(again) == csv_text
    assert harness.format_csv(pooled) == csv_text
    assert harness.to_json(again) == json_text
    assert harness.to_json(pooled) == json_text


def test_failed_point_becomes_a_row():
    sc = Scenario.model_validate(
        {
            "domain": GAP_DOMAIN,
            "potential": {"poles": [{"at": [0, 1], "flux": 0.5}]},
            "mesh": {"kind": "rect_diff", "ladder": [0.5]},
            "sweep": {"axis": "epsilon", "values": [4.5, 0.5]},
        }
    )
    record = harness.run_sweep(sc)
    ok, failed = record.points
    assert ok.value == 0.5 and ok.status == "ok" and ok.lambda1 > 0
    assert failed.value == 4.5 and failed.status == "failed"
    assert failed.error


def test_csv_columns():
    record = harness.run_sweep(_annulus_scenario(sweep={"axis": "flux", "values": [0.5]}))
    rows = list(csv.reader(io.StringIO(harness.format_csv(record))))
    header = rows[0]
    assert header[:7] == ["value", "status", "lambda1", "residual", "h", "mesher", "symmetry_residual"]
    assert "rhs_single_hole_width" in header
    assert "margin_single_hole_width" in header
    assert header[-1] == "error"
    assert rows[1][:2] == ["0.5", "ok"]
    assert rows[1][-1] == ""


def test_timing_is_opt_in(monkeypatch):
    monkeypatch.setenv("FLUXGAP_PERSIST_TIMING", "true")
    record = harness.run_sweep(_annulus_scenario())
    assert set(record.timing) == {"total_seconds"}


def test_run_record_json(tmp_path):
    record = harness.run_sweep(_annulus_scenario())
    path = harness.write_text(tmp_path / "out" / "run.json", harness.to_json(record))
    back = RunRecord.model_validate_json(path.read_text())
    assert back.points[0].lambda1 == record.points[0].lambda1
    assert "numpy" in back.versions
