import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fidux.cli import main

SCHEMA = json.loads(
    (Path(__file__).parent.parent / "src" / "fidux" / "schemas" /
     "fidux-report-1.schema.json").read_text()
)


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def validate(report: dict) -> None:
    jsonschema.validate(report, SCHEMA)


def test_fit_deterministic_and_valid(capsys, fixtures_dir):
    args = ["fit", fixtures_dir / "six_rows.csv", "--seed", 1,
            "--n-mcmc", 30, "--n-burn", 3]
    code, out1, _ = run_cli(capsys, *args)
    assert code == 0
    code, out2, _ = run_cli(capsys, *args)
    assert out1 == out2
    report = json.loads(out1)
    validate(report)
    assert report["kind"] == "fit"
    assert report["data"] == {"n": 6, "p": 2, "m": 4, "covariates": ["x1", "x2"]}
    assert report["timing"] is None
    for coef in report["coefficients"]:
        assert coef["fiducial"]["ci_lower"] <= coef["fiducial"]["estimate"]
        assert coef["fiducial"]["estimate"] <= coef["fiducial"]["ci_upper"]


def test_fit_monotone_dataset_reports_divergence(capsys, fixtures_dir):
    code, out, _ = run_cli(capsys, "fit", fixtures_dir / "monotone.csv",
                           "--seed", 1, "--n-mcmc", 20, "--n-burn", 2)
    assert code == 0
    report = json.loads(out)
    validate(report)
    assert report["mle"]["converged"] is False
    assert report["mle"]["divergence_reason"] == "monotone"
    coef = report["coefficients"][0]
    assert coef["mle"]["estimate"] is None
    assert np.isfinite(coef["fiducial"]["ci_lower"])
    assert np.isfinite(coef["fiducial"]["ci_upper"])


def test_fit_missing_column_exits_2(capsys, fixtures_dir):
    code, out, err = run_cli(capsys, "fit", fixtures_dir / "six_rows.csv",
                             "--status-col", "missing_status")
    assert code == 2
    assert "missing_status" in err


def test_fit_table_and_outputs(capsys, fixtures_dir, tmp_path):
    out_json = tmp_path / "report.json"
    draws_csv = tmp_path / "draws.csv"
    code, out, err = run_cli(capsys, "fit", fixtures_dir / "six_rows.csv",
                             "--seed", 2, "--n-mcmc", 15, "--n-burn", 2,
                             "--table", "--out", out_json, "--draws-csv", draws_csv,
                             "--baseline-draws", 5, "--timing")
    assert code == 0
    assert "coefficient" in err
    report = json.loads(out_json.read_text())
    validate(report)
    assert report["baseline"]["draws"] == 5
    assert report["timing"]["seconds"] > 0
    rows = draws_csv.read_text().strip().splitlines()
    assert rows[0] == "beta_1,beta_2"
    assert len(rows) == 16


def test_simulate_smoke_fields_and_files(capsys, tmp_path, fixtures_dir):
    scen = tmp_path / "scen.json"
    scen.write_text(json.dumps({
        "n": 10,
        "scenarios": [{"name": "tiny", "beta_true": [0.5, 1.0]}],
    }))
    out_dir = tmp_path / "study"
    code, out, err = run_cli(capsys, "simulate", scen, "--reps", 1,
                             "--n-mcmc", 8, "--n-burn", 1, "--seed", 4,
                             "--out-dir", out_dir)
    assert code == 0
    report = json.loads(out)
    validate(report)
    assert report["scenarios"][0]["name"] == "tiny"
    assert (out_dir / "study_report.json").exists()
    assert (out_dir / "study_table.txt").exists()
    on_disk = json.loads((out_dir / "study_report.json").read_text())
    assert on_disk == report


def test_simulate_bad_scenario_file_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run_cli(capsys, "simulate", bad, "--reps", 1)
    assert code == 2
    missing = tmp_path / "absent.json"
    code, _, err = run_cli(capsys, "simulate", missing, "--reps", 1)
    assert code == 2


def test_density_check_p2_exits_2(capsys, fixtures_dir):
    code, _, err = run_cli(capsys, "density-check", fixtures_dir / "six_rows.csv")
    assert code == 2
    assert "single covariate" in err


def test_density_check_degenerate_exits_2(capsys, fixtures_dir):
    code, _, err = run_cli(capsys, "density-check", fixtures_dir / "degenerate.csv",
                           "--n-draws", 10)
    assert code == 2
    assert "equal" in err


def test_density_check_impossible_threshold_fails(capsys, fixtures_dir):
    code, out, _ = run_cli(capsys, "density-check", fixtures_dir / "density_n15.csv",
                           "--seed", 5, "--n-draws", 60, "--threshold", 0.0)
    assert code == 1
    report = json.loads(out)
    validate(report)
    assert report["passed"] is False


def test_density_check_passes_loose_threshold(capsys, fixtures_dir):
    code, out, _ = run_cli(capsys, "density-check", fixtures_dir / "density_n15.csv",
                           "--seed", 5, "--n-draws", 150, "--threshold", 0.35)
    assert code == 0
    report = json.loads(out)
    validate(report)
    assert report["ks_distance"] <= 0.35
