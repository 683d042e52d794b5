from __future__ import annotations

import json

import pytest

from eslab.cli import main

SIMULATE_FILES = {"manifest.json", "trajectory.csv", "dissipation.json", "density_header.json", "densities.csv"}


def snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_writes_five_files_and_manifest_reproduces(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "--scenario", "ou-relaxation", "--cells", "256", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == SIMULATE_FILES
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["cells"] == [256] and "eslab_version" in man
    diss = json.loads((out / "dissipation.json").read_text())
    assert diss["residual"] <= 1e-2 * max(1, abs(diss["F_drop"]))

    again = tmp_path / "again"
    assert main(["simulate", "--config", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert snapshot(out) == snapshot(again)


def test_simulate_figures_flag(tmp_path):
    out = tmp_path / "fig"
    assert main(["simulate", "--scenario", "ou-closed-form", "--out", str(out), "--figures"]) == 0
    assert (out / "trajectory.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_invalid_input_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "none"
    assert main(["simulate", "--scenario", "ou-relaxation", "--steps", "0", "--out", str(out)]) == 2
    assert not out.exists()
    assert "steps" in capsys.readouterr().err
    assert main(["verify", "--scenario", "nope", "--out", str(out)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 2
    assert main(["simulate", "--scenario", "ou-relaxation", "--workers", "0", "--out", str(out)]) == 2
    assert main(["simulate", "--scenario", "ou-relaxation", "--backend", "magic", "--out", str(out)]) == 2
    assert not out.exists()


def test_verify_pass_and_fail_exit_codes(tmp_path, capsys):
    out = tmp_path / "rep"
    assert main(["verify", "--scenario", "geodesic-gaussian,stationary", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"geodesic-gaussian.report.json", "geodesic-gaussian.report.png",
            "stationary.report.json", "stationary.report.png"} == names
    rep = json.loads((out / "geodesic-gaussian.report.json").read_text())
    assert rep["pass"]["esl"] is True and rep["Sigma"] == pytest.approx(16.0)

    bad = tmp_path / "bad"
    assert main(["verify", "--scenario", "ou-coarse", "--out", str(bad), "--no-figures"]) == 1
    assert "under-resolved" in capsys.readouterr().out
    assert [p.name for p in bad.iterdir()] == ["ou-coarse.report.json"]


def test_report_png_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["verify", "--scenario", "stationary", "--out", str(d)]) == 0
    assert snapshot(a) == snapshot(b)


def test_transport_command(tmp_path, capsys):
    (tmp_path / "a.json").write_text(json.dumps({"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]}))
    (tmp_path / "b.json").write_text(json.dumps({"kind": "gaussian", "mean": [3.0], "cov": [[1.0]]}))
    (tmp_path / "p.csv").write_text("theta_1,weight\n0,0.5\n1,0.5\n")
    (tmp_path / "r.csv").write_text("theta_1,weight\n1,0.5\n2,0.5\n")
    assert main(["transport", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 0
    assert "W2=3.0 " in capsys.readouterr().out
    out = tmp_path / "plan"
    assert main(["transport", str(tmp_path / "p.csv"), str(tmp_path / "r.csv"), "--backend", "exact", "--out", str(out)]) == 0
    assert "W2=1.0 " in capsys.readouterr().out
    assert (out / "plan.csv").exists()
    assert main(["transport", str(tmp_path / "p.csv"), str(tmp_path / "r.csv"), "--backend", "entropic"]) == 0
    assert main(["transport", str(tmp_path / "a.json"), str(tmp_path / "p.csv")]) == 2


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", "--scenario", "geodesic-gaussian", "--horizons", "1,2,4", "--out", str(out)]) == 0
    lines = (out / "scaling.csv").read_text().splitlines()
    assert lines[0].startswith("horizon,Sigma_physical") and len(lines) == 4
    assert (out / "scaling.png").exists()
    assert main(["sweep", "--scenario", "geodesic-gaussian", "--horizons", "1,x", "--out", str(out)]) == 2


def test_presets_and_particles(tmp_path, capsys):
    assert main(["presets"]) == 0
    text = capsys.readouterr().out
    assert "ou-relaxation" in text and "(suite)" in text
    a, b = tmp_path / "w1", tmp_path / "w4"
    args = ["simulate", "--scenario", "ou-particles", "--particles", "400", "--steps", "20"]
    assert main(args + ["--out", str(a), "--workers", "1"]) == 0
    assert main(args + ["--out", str(b), "--workers", "4"]) == 0
    assert snapshot(a) == snapshot(b)
