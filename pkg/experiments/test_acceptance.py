"""Figure-level checks on the full sweeps. Minutes each; run with --runslow.

Run tests with: python -m pytest test_acceptance.py -v --runslow
"""
from __future__ import annotations

import numpy as np
import pytest

from control import predistort
from distortion_presets import make_preset_kernel
from estimation import mase
from parameters import ReproduceConfig
from pulses import generate_gaussian_pulse
from reproduce import reproduce
from volterra import apply, identity_kernel

pytestmark = pytest.mark.slow


def test_kernel_recovery_with_long_memory_estimate():
    table = reproduce("fig3")["fig3c"].table.set_index("distortion")
    row = table.loc["C"]
    assert row["h1_mase"] <= 1e-6 and row["h2_mase"] <= 1e-6, row.to_dict()
    assert row["tail_ratio"] <= 1e-3
    assert row["memory_estimate"] <= row["R_true"]


def test_quadratic_estimate_beats_linear():
    table = reproduce("fig1")["fig1b"].table.set_index("distortion")
    assert (table["quadratic_mase"] < table["linear_mase"]).all(), table
    assert table.loc["C", "quadratic_mase"] * 10 <= table.loc["C", "linear_mase"]


def _by_method(table):
    qr = table[table["method"] == "qr"].set_index("M").sort_index()
    normal = table[table["method"] == "normal"].set_index("M").sort_index()
    return qr, normal


def test_orthogonalization_is_never_worse():
    panels = reproduce("fig5")
    for name in ("fig5a", "fig5c"):
        qr, normal = _by_method(panels[name].table)
        # relative slack for floating-point ties where both solves agree
        assert (qr["mean_error"] <= normal["mean_error"] * (1 + 1e-9)).all(), \
            f"{name}: QR above normal equations\n{qr['mean_error']}\n{normal['mean_error']}"

    qr, normal = _by_method(panels["fig5a"].table)
    gap = (normal["mean_error"] - qr["mean_error"]).to_numpy()
    half_width = (normal["ci_high"] - normal["mean_error"]).to_numpy() \
        + (qr["ci_high"] - qr["mean_error"]).to_numpy()
    slack = np.maximum(half_width[:-1], half_width[1:])
    assert np.all(np.diff(gap) >= -slack), f"gap should not shrink with M: {gap}"


def test_frequency_content_ordering_of_training_pulses():
    panels = reproduce("fig6")
    for name in ("fig6a", "fig6c"):
        means = panels[name].table.groupby("pulse_type")["mean_error"].mean()
        assert means["noise"] < means["spline"] <= means["cosine"] < means["gaussian"], \
            f"{name}: {means.to_dict()}"


def test_ideal_excitation_band():
    table = reproduce("fig4")["fig4"].table
    ideal = table[table["distortion"] == "ideal"].sort_values("duration_us")
    errors = ideal["excitation_error"].to_numpy()
    assert np.all((errors >= 0.005) & (errors <= 0.08)), errors
    assert np.sum(np.diff(errors) > 0) <= 1, "error should fall with duration"


def test_distortion_hurts_and_correction_helps():
    table = reproduce("fig9")["fig9"].table
    assert set(table["distortion"]) == {"C", "F"}
    assert (table["uncorrected_error"] >= table["ideal_error"]).all()
    assert (table["corrected_error"] <= table["uncorrected_error"]).all()
    f = table[table["distortion"] == "F"]
    assert (f["corrected_error"] <= 2 * f["ideal_error"]).all(), f


def test_penalty_mode_correction_helps():
    table = reproduce("fig8", ReproduceConfig(durations=(0.2, 0.4)))["fig8"].table
    assert (table["mode"] == "penalty-pg").all()
    assert (table["corrected_error"] <= table["uncorrected_error"]).all()


def test_predistortion_round_trip():
    kernel = make_preset_kernel("C")
    cfg = ReproduceConfig()
    steps = cfg.predistort_steps
    target = generate_gaussian_pulse(steps, steps / 2, cfg.predistort_width_fraction * steps,
                                     cfg.predistort_amplitude)
    result = predistort(kernel, target)
    assert mase(target, apply(kernel, result.pulse)) <= 1e-3

    exact = predistort(identity_kernel(), target)
    assert np.array_equal(exact.pulse.samples, target.samples)
