"""Tests for the command line, config loading and the sweep runner.

Run tests with: python -m pytest test_cli.py -v
"""
from __future__ import annotations

import json

import numpy as np
import pytest
from click.testing import CliRunner

from cli import main
from config_loading import load_command_config, load_rydberg_system
from estimation import make_training_pairs
from models import ValidationError, VolterraKernel
from parameters import TWO_PI, OptimizerConfig, ReproduceConfig
from pulses import generate_gaussian_pulse, generate_random_noise, read_pulse, write_pulse, write_training_set
from reproduce import FIGURES, reproduce
from runner import THREADS_ENV, run_sweep, thread_count
from volterra import identity_kernel, read_kernel, write_kernel


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


SMALL_FIG5 = {
    "pulse_steps": 60, "test_pulses": 3, "memory_grid": [1, 2], "pulse_count_grid": [1, 2],
    "fixed_pulses": 2, "noise_levels": [0.0, 1e-9],
}


# ==========================================================================
# KERNELS AND PULSES
# ==========================================================================

def test_make_kernel_preset(tmp_path):
    result = run("--out", tmp_path, "make-kernel", "--preset", "C")
    assert result.exit_code == 0, result.output
    kernel = read_kernel(tmp_path / "C.json")
    assert kernel.memory_length == 50
    assert kernel.coefficient_count == 1326


def test_make_kernel_unknown_preset(tmp_path):
    result = run("--out", tmp_path, "make-kernel", "--preset", "Z")
    assert result.exit_code == 2
    assert "A" in result.output and "small" in result.output


def test_make_kernel_needs_preset_or_parameters(tmp_path):
    assert run("--out", tmp_path, "make-kernel").exit_code == 2
    result = run("--out", tmp_path, "make-kernel", "--R", 4, "--sigma1", 1.0, "--sigma2", 2.0,
                 "--name", "custom.json")
    assert result.exit_code == 0, result.output
    assert read_kernel(tmp_path / "custom.json").memory_length == 4


def test_distort_keeps_input_order(tmp_path):
    kernel_path = write_kernel(tmp_path / "k.json", VolterraKernel(0.0, [1.0, 0.5], np.zeros(3)))
    paths = [write_pulse(tmp_path / f"p{i}.in.csv", generate_random_noise(5 + i, seed=i))
             for i in range(3)]
    out = tmp_path / "out"
    result = run("--out", out, "distort", kernel_path, *paths)
    assert result.exit_code == 0, result.output

    for i in range(3):
        y = read_pulse(out / f"p{i}.out.csv")
        assert len(y) == 5 + i + 1
    assert result.output.index("p0.out.csv") < result.output.index("p2.out.csv")


def test_distort_missing_file(tmp_path):
    kernel_path = write_kernel(tmp_path / "k.json", identity_kernel())
    result = run("--out", tmp_path, "distort", kernel_path, tmp_path / "nope.csv")
    assert result.exit_code == 2
    assert "not found" in result.output


def test_distort_noise_is_seeded(tmp_path):
    kernel_path = write_kernel(tmp_path / "k.json", identity_kernel())
    pulse = write_pulse(tmp_path / "x.csv", generate_random_noise(20, seed=1))
    for name in ("a", "b"):
        result = run("--seed", 5, "--out", tmp_path / name, "distort", kernel_path, pulse,
                     "--noise-sigma", 1e-3)
        assert result.exit_code == 0, result.output
    first = (tmp_path / "a" / "x.out.csv").read_text()
    assert first == (tmp_path / "b" / "x.out.csv").read_text()
    assert not np.array_equal(read_pulse(tmp_path / "a" / "x.out.csv").samples,
                              read_pulse(pulse).samples)


# ==========================================================================
# ESTIMATION AND PRE-DISTORTION
# ==========================================================================

def test_estimate_with_reference(tmp_path):
    truth = VolterraKernel.from_matrix(0.1, [0.6, 0.3], [[0.02, 0.01], [0.01, -0.03]])
    truth_path = write_kernel(tmp_path / "truth.json", truth)
    training = tmp_path / "train"
    write_training_set(training, make_training_pairs(truth, [generate_random_noise(50, seed=s)
                                                            for s in range(2)]))
    out = tmp_path / "out"
    result = run("--out", out, "estimate", training, "-R", 2, "--truth", truth_path)
    assert result.exit_code == 0, result.output

    report = json.loads((out / "report.json").read_text())
    assert report["M"] == 6 and report["rows"] == 102
    assert report["kernel_mase"]["h1"] < 1e-8
    estimated = read_kernel(out / "kernel.json")
    assert estimated.h0 == pytest.approx(0.1, abs=1e-10)


def test_estimate_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    result = run("--out", tmp_path / "out", "estimate", tmp_path / "empty", "-R", 2)
    assert result.exit_code == 2
    assert "no training pairs" in result.output


def test_predistort_identity(tmp_path):
    kernel_path = write_kernel(tmp_path / "id.json", identity_kernel())
    target = generate_gaussian_pulse(30, 15, 4)
    target_path = write_pulse(tmp_path / "target.csv", target)
    result = run("--out", tmp_path / "out", "predistort", kernel_path, target_path)
    assert result.exit_code == 0, result.output
    back = read_pulse(tmp_path / "out" / "target.predistorted.csv")
    assert np.array_equal(back.samples, target.samples)


# ==========================================================================
# CONTROL AND SWEEPS
# ==========================================================================

def test_optimize_writes_controls(tmp_path):
    kernel_path = write_kernel(tmp_path / "k.json", VolterraKernel(0.0, [0.9, 0.1], np.zeros(3)))
    out = tmp_path / "out"
    result = run("--out", out, "optimize", "--duration", 0.02, "--steps", 4,
                 "--kernel", kernel_path, "--max-iterations", 2)
    assert result.exit_code == 0, result.output

    data = json.loads((out / "result.json").read_text())
    assert data["steps"] == 4 and data["distorted_steps"] == 5
    assert 0.0 <= data["final_cost"] <= 1.0
    assert len(read_pulse(out / "omega_b.distorted.csv")) == 5


def test_optimize_with_optimizer_config_file(tmp_path):
    settings = tmp_path / "optimizer.json"
    settings.write_text(json.dumps({"mode": "penalty-pg", "max_iterations": 3,
                                    "box_bounds": [[0.0, 60.0], [0.0, 60.0]]}))
    out = tmp_path / "out"
    result = run("--out", out, "optimize", "--duration", 0.02, "--steps", 4,
                 "--optimizer-config", settings, "--max-iterations", 1)
    assert result.exit_code == 0, result.output
    data = json.loads((out / "result.json").read_text())
    assert data["mode"] == "penalty-pg"
    assert data["iterations"] <= 1, "flags override the file"

    settings.write_text(json.dumps({"max_iter": 3}))
    result = run("--out", out, "optimize", "--duration", 0.02, "--optimizer-config", settings)
    assert result.exit_code == 2
    assert "max_iter" in result.output

    result = run("--out", out, "optimize", "--duration", 0.02,
                 "--optimizer-config", tmp_path / "missing.json")
    assert result.exit_code == 2


def test_reproduce_unknown_figure(tmp_path):
    result = run("--out", tmp_path, "reproduce", "fig2")
    assert result.exit_code == 2
    for figure_id in FIGURES:
        assert figure_id in result.output


def test_config_with_unknown_key(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 1, "colour": "blue"}))
    result = run("--config", config, "reproduce", "fig5")
    assert result.exit_code == 2
    assert "colour" in result.output


def test_reproduce_small_fig5(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 3, "out": "results", "precision": 6,
                                  "reproduce": SMALL_FIG5}))
    result = run("--config", config, "reproduce", "fig5")
    assert result.exit_code == 0, result.output

    panel_dir = tmp_path / "results" / "fig5"
    assert sorted(p.name for p in panel_dir.iterdir()) == \
        ["fig5a.csv", "fig5b.csv", "fig5c.csv", "fig5d.csv"]
    text = (panel_dir / "fig5a.csv").read_text()
    assert text.startswith("# fig5 seed=3\n")
    assert "M,mean_error,ci_low,ci_high,method" in text
    assert "pulses,mean_error,ci_low,ci_high,method" in (panel_dir / "fig5b.csv").read_text()


def test_reproduce_panels_are_seeded():
    cfg = ReproduceConfig(**SMALL_FIG5)
    first = reproduce("fig5", cfg, seed=1)
    second = reproduce("fig5", cfg, seed=1)
    for name in first:
        assert first[name].table.equals(second[name].table)
    assert set(first["fig5a"].table["method"]) == {"qr", "normal"}
    assert list(first["fig5a"].table["M"].unique()) == [3, 6]

    with pytest.raises(ValidationError, match="fig9"):
        reproduce("fig10")


def test_reproduce_with_grid_config_file(tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps(SMALL_FIG5))
    result = run("--out", tmp_path / "results", "reproduce", "fig5", "--grid-config", grid)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "results" / "fig5" / "fig5d.csv").exists()

    grid.write_text(json.dumps({**SMALL_FIG5, "pulse_count": 3}))
    result = run("--out", tmp_path / "results", "reproduce", "fig5", "--grid-config", grid)
    assert result.exit_code == 2
    assert "pulse_count" in result.output


def test_fig1_without_the_example_distortion(monkeypatch):
    monkeypatch.setattr("reproduce.NAMED_DISTORTIONS", ("D",))
    panels = reproduce("fig1", ReproduceConfig(recovery_steps=300, comparison_test_pulses=2))
    assert list(panels) == ["fig1b"]
    assert list(panels["fig1b"].table["distortion"]) == ["D"]


def test_fig7_target_comes_from_the_grid_config():
    cfg = ReproduceConfig(predistort_steps=60, predistort_width_fraction=0.2,
                          predistort_amplitude=3.0, durations=(0.02,))
    panels = reproduce("fig7", cfg, opt=OptimizerConfig(max_iterations=2))
    gauss = panels["fig7a"]
    assert len(gauss.table) == 60
    assert gauss.table["target"].max() == pytest.approx(3.0)
    assert "Gaussian target: 60 steps, centre 30, width 12, amplitude 3.0" in gauss.notes
    assert set(panels) == {"fig7a", "fig7b", "fig7c"}

    with pytest.raises(ValidationError):
        ReproduceConfig(predistort_steps=1)


def test_run_sweep_keeps_order():
    assert run_sweep(lambda v: v * v, range(10), max_workers=3) == [v * v for v in range(10)]
    assert run_sweep(str, [], max_workers=2) == []


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert thread_count() == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ValidationError):
        thread_count()
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ValidationError):
        thread_count()


def test_config_paths_resolve_against_config_dir(tmp_path):
    config = tmp_path / "nested" / "config.json"
    config.parent.mkdir()
    config.write_text(json.dumps({"out": "results", "seed": 2}))
    loaded = load_command_config(config, {"out", "seed"}, path_keys=("out",))
    assert loaded["out"] == (tmp_path / "nested" / "results").resolve()
    assert loaded["seed"] == 2

    system_file = tmp_path / "system.json"
    system_file.write_text(json.dumps({"gamma_mhz": 2.0, "gamma_d_mhz": 0.0}))
    system = load_rydberg_system(system_file)
    assert system.Gamma == pytest.approx(TWO_PI * 2.0)
    assert system.Gamma_d == 0.0
