"""Command-line driver: exit codes, manifests, and reproducible outputs."""

import json
import math

import pytest

from fraclab.cli import main
from fraclab.model import (
    Interval,
    McConfig,
    PathConfig,
    Scenario,
    SineMode,
    scenario_to_json,
)

pytestmark = pytest.mark.filterwarnings("ignore::pytest.PytestUnraisableExceptionWarning")


def _mode_scenario(**mc_kw) -> Scenario:
    mc = McConfig(n_samples=2500, seed=11, path=PathConfig(h=5e-3), **mc_kw)
    return Scenario(
        alpha=2.0,
        beta=0.5,
        domain=Interval(0.0, math.pi),
        T=2.0,
        phi0=SineMode(1, 0.0, math.pi),
        mc=mc,
    )


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(scenario_to_json(_mode_scenario()))
    return path


def _solve(scenario_file, out_dir, *extra) -> int:
    return main([
        "solve",
        "--scenario", str(scenario_file),
        "--t-grid", "0.3:0.6:2",
        "--x-grid", "1.0:2.0:2",
        "--out", str(out_dir),
        *extra,
    ])


def test_solve_both_backends_passes_and_writes_everything(scenario_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert _solve(scenario_file, out) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok"
    assert sorted(man["outputs"]) == ["comparison.csv", "mc_results.csv", "spectral_results.csv"]
    assert len(man["scenario_hash"]) == 64
    assert man["seed"] == 11
    assert man["config"]["scenario"]["beta"] == 0.5
    assert man["wall_clock_s"] > 0.0
    lines = (out / "comparison.csv").read_text().splitlines()
    assert lines[0].startswith("t,x,mc_mean,spectral,diff")
    assert len(lines) == 5
    assert all(line.endswith(",PASS") for line in lines[1:])
    assert "comparison verdict: PASS (4 nodes, route post)" in capsys.readouterr().out


def test_solve_worker_count_leaves_results_byte_identical(scenario_file, tmp_path):
    outs = []
    for workers, name in ((1, "w1"), (3, "w3")):
        out = tmp_path / name
        assert _solve(scenario_file, out, "--backend", "mc", "--workers", str(workers)) == 0
        outs.append((out / "mc_results.csv").read_bytes())
    assert outs[0] == outs[1]


def test_solve_seed_override_lands_in_manifest_and_data(scenario_file, tmp_path):
    base, other = tmp_path / "base", tmp_path / "other"
    assert _solve(scenario_file, base, "--backend", "mc") == 0
    assert _solve(scenario_file, other, "--backend", "mc", "--seed", "99") == 0
    assert json.loads((other / "manifest.json").read_text())["seed"] == 99
    assert (base / "mc_results.csv").read_bytes() != (other / "mc_results.csv").read_bytes()


def test_solve_single_backend_writes_only_its_table(scenario_file, tmp_path):
    out = tmp_path / "mc_only"
    assert _solve(scenario_file, out, "--backend", "mc") == 0
    assert json.loads((out / "manifest.json").read_text())["outputs"] == ["mc_results.csv"]
    assert not (out / "spectral_results.csv").exists()
    out = tmp_path / "spec_only"
    assert _solve(scenario_file, out, "--backend", "spectral") == 0
    assert json.loads((out / "manifest.json").read_text())["outputs"] == ["spectral_results.csv"]
    assert not (out / "mc_results.csv").exists()


@pytest.mark.parametrize("grid", ["0:1", "0:1:0", "1:0:5", "a:b:3"])
def test_solve_rejects_malformed_grids_as_usage_errors(scenario_file, tmp_path, grid, capsys):
    with pytest.raises(SystemExit) as exc:
        main([
            "solve",
            "--scenario", str(scenario_file),
            "--t-grid", grid,
            "--x-grid", "1.0:2.0:2",
            "--out", str(tmp_path / "x"),
        ])
    assert exc.value.code == 2
    capsys.readouterr()


def test_solve_invalid_scenario_exits_one_with_error_manifest(tmp_path, capsys):
    bad = _mode_scenario()
    bad = type(bad)(**{**bad.__dict__, "T": -1.0})
    path = tmp_path / "bad.json"
    path.write_text(scenario_to_json(bad))
    out = tmp_path / "run"
    assert _solve(path, out) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error"
    assert "scenario invalid" in man["error"]
    assert "error:" in capsys.readouterr().err


def test_validate_specfun_suite_passes(tmp_path, capsys):
    out = tmp_path / "val"
    assert main(["validate", "--suite", "specfun", "--out", str(out)]) == 0
    man = json.loads((out / "validation_specfun_manifest.json").read_text())
    assert man["status"] == "ok"
    assert man["outputs"] == ["validation_specfun.csv"]
    lines = (out / "validation_specfun.csv").read_text().splitlines()
    assert lines[0] == "name,passed,measured,tolerance,detail"
    assert len(lines) > 1
    assert all(",1," in line for line in lines[1:])
    stdout = capsys.readouterr().out
    assert "suite specfun:" in stdout
    assert "PASS" in stdout


def test_validate_unknown_suite_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--suite", "nonsense"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_validate_bad_budget_exits_one_with_error_manifest(tmp_path, capsys):
    out = tmp_path / "val"
    code = main(["validate", "--suite", "overshoot", "--samples", "-5", "--out", str(out)])
    assert code == 1
    man = json.loads((out / "validation_overshoot_manifest.json").read_text())
    assert man["status"] == "error"
    assert man["error"]
    capsys.readouterr()


def test_trajectory_writes_reproducible_csv(scenario_file, tmp_path):
    args = [
        "trajectory",
        "--scenario", str(scenario_file),
        "--t-grid", "0.1:0.9:5",
        "--out", str(tmp_path / "traj.csv"),
    ]
    assert main(args) == 0
    first = (tmp_path / "traj.csv").read_bytes()
    man = json.loads((tmp_path / "traj.manifest.json").read_text())
    assert man["status"] == "ok"
    assert man["config"]["x0"] == [math.pi / 2]
    assert man["outputs"] == ["traj.csv"]
    header = first.decode().splitlines()[0]
    assert header == "t,tau0,overshoot,y1"
    assert main(args) == 0
    assert (tmp_path / "traj.csv").read_bytes() == first


def test_trajectory_accepts_explicit_start_and_seed(scenario_file, tmp_path):
    out = tmp_path / "traj.csv"
    args = [
        "trajectory",
        "--scenario", str(scenario_file),
        "--t-grid", "0.1:0.9:5",
        "--x0", "0.5",
        "--seed", "123",
        "--out", str(out),
    ]
    assert main(args) == 0
    man = json.loads(out.with_suffix(".manifest.json").read_text())
    assert man["config"]["x0"] == [0.5]
    assert man["seed"] == 123
