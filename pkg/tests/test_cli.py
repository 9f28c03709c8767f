"""Batch CLI: exit codes, artifacts, byte-level determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from magflows import cli, io


def run_cli(args):
    return cli.main(list(args))


def test_check_algebra_writes_reports(tmp_path):
    out = tmp_path / "alg"
    code = run_cli(["check-algebra", "--seed", "5", "--n", "200",
                    "--outdir", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["det_residual"] <= 1e-15
    assert summary["max_commutation_residual"] <= 1e-12
    assert (out / "commutation.csv").exists()
    assert (out / "manifest.json").exists()


def test_check_algebra_requires_seed(tmp_path):
    code = run_cli(["check-algebra", "--outdir", str(tmp_path / "x")])
    assert code == 2


def test_simulate_single_orbit(tmp_path):
    out = tmp_path / "sim"
    code = run_cli(["simulate", "--preset", "flat-torus", "--T", "2.5",
                    "--dt", "1e-3", "--phi", "0.0", "--field", "0.0",
                    "--outdir", str(out)])
    assert code == 0
    lines = (out / "orbit_000.csv").read_text().splitlines()
    assert lines[0] == "t,x,y,phi,word_length"
    last = lines[-1].split(",")
    assert abs(float(last[0]) - 2.5) <= 1e-12
    assert int(last[4]) == 2
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["count"] == 1


def test_simulate_outputs_are_byte_identical(tmp_path):
    args = ["simulate", "--preset", "genus2-octagon", "--T", "1.5",
            "--n", "3", "--seed", "7", "--field", "0.5"]
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert run_cli(args + ["--outdir", str(out)]) == 0
        outs.append(out)
    for fname in ("orbit_000.csv", "orbit_001.csv", "orbit_002.csv",
                  "diagnostics.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_variation_reports_conjugate_times(tmp_path):
    out = tmp_path / "var"
    code = run_cli(["variation", "--preset", "half-plane", "--field", "2.0",
                    "--T", "6.0", "--outdir", str(out)])
    assert code == 0
    times = json.loads((out / "conjugate_times.json").read_text())["times"]
    step = np.pi / np.sqrt(3.0)
    assert len(times) == 3
    assert max(abs(t - step * (i + 1)) for i, t in enumerate(times)) <= 1e-6
    assert (out / "variation.csv").exists()


def test_invariants_verdict_exit_codes(tmp_path):
    budget = ["--n-action", "800", "--n-maslov", "30", "--n-cycle", "16",
              "--T", "15", "--seed", "2"]
    out1 = tmp_path / "horo"
    code1 = run_cli(["invariants", "--preset", "genus2-octagon",
                     "--field", "1.0", "--outdir", str(out1)] + budget)
    assert code1 == 0
    rep = json.loads((out1 / "report.json").read_text())
    assert rep["horocycle_verdict"] == "horocyclic"
    out2 = tmp_path / "not"
    code2 = run_cli(["invariants", "--preset", "genus2-octagon",
                     "--field", "0.5", "--outdir", str(out2)] + budget)
    assert code2 == 1
    rep2 = json.loads((out2 / "report.json").read_text())
    assert rep2["horocycle_verdict"] != "horocyclic"
    assert (out2 / "samples.csv").exists()


def test_critical_value_grid_artifact(tmp_path):
    out = tmp_path / "crit"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "scenario": "critical-value", "preset": "flat-torus",
        "field": {"kind": "trig", "a": 0.7, "b": -0.4, "c": 0.3},
        "resolution": 24}))
    code = run_cli(["critical-value", str(cfg), "--outdir", str(out)])
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["c_lower"] <= cert["c_upper"] + 1e-12
    grid, bbox = io.read_grid(out / "u_grid.bin")
    assert grid.shape == (24, 24)
    assert bbox == (0.0, 1.0, 0.0, 1.0)


def test_closed_orbit_flat_diagonal(tmp_path):
    out = tmp_path / "orbit"
    code = run_cli(["closed-orbit", "--preset", "flat-torus",
                    "--class-word", "t1 t2^2", "--k", "0.5",
                    "--outdir", str(out)])
    assert code == 0
    res = json.loads((out / "closed_orbit.json").read_text())
    assert res["ok"] is True
    assert abs(res["length"] - np.sqrt(5.0)) <= 1e-6
    assert (out / "orbit_nodes.csv").exists()


def test_acceptance_subset_via_cli(tmp_path, capsys):
    out = tmp_path / "acc"
    code = run_cli(["acceptance", "--criteria", "1,8", "--outdir", str(out)])
    assert code == 0
    report = json.loads((out / "acceptance.json").read_text())
    assert [r["criterion"] for r in report] == [1, 8]
    assert all(r["passed"] for r in report)
    shown = capsys.readouterr().out
    assert "criterion 1: PASS" in shown


def test_config_errors_exit_two(tmp_path):
    assert run_cli(["simulate", "--preset", "klein-bottle", "--T", "1",
                    "--outdir", str(tmp_path / "a")]) == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scenario": "simulate", "preset": "flat-torus",
                               "T": 1.0, "wobble": True}))
    assert run_cli(["simulate", str(cfg),
                    "--outdir", str(tmp_path / "b")]) == 2
    assert run_cli(["simulate", "--preset", "flat-torus", "--T", "1",
                    "--n", "4", "--outdir", str(tmp_path / "c")]) == 2


def test_runtime_errors_write_a_record(tmp_path):
    out = tmp_path / "err"
    code = run_cli(["simulate", "--preset", "flat-torus", "--T", "1.0",
                    "--dt", "-0.5", "--outdir", str(out)])
    assert code == 1
    record = json.loads((out / "error.json").read_text())
    assert record["error"]
    assert record["message"]


def test_console_entry_point_subprocess(tmp_path):
    out = tmp_path / "sub"
    proc = subprocess.run(
        [sys.executable, "-c",
         "import sys; from magflows.cli import main; sys.exit(main())",
         "check-algebra", "--seed", "1", "--n", "50", "--outdir", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (out / "summary.json").exists()
