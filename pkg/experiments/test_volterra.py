"""Tests for the Volterra forward model, its Jacobian and kernel files.

Run tests with: python -m pytest test_volterra.py -v
"""
from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distortion_presets import DISTORTION_PRESETS, NAMED_DISTORTIONS, get_preset, make_preset_kernel
from models import Pulse, ValidationError, VolterraKernel, coefficient_count
from utils import make_rng
from volterra import (apply, estimate_memory_length, from_coefficients, identity_kernel,
                      jacobian, make_gaussian_kernel, pad, read_kernel, to_coefficients,
                      truncate, write_kernel, zero_kernel)


def random_kernel(R: int, seed: int, scale: float = 1.0) -> VolterraKernel:
    rng = make_rng(seed)
    h2 = rng.uniform(-scale, scale, size=(R, R))
    return VolterraKernel.from_matrix(rng.uniform(-1, 1), rng.uniform(-1, 1, size=R), h2)


def random_input(L: int, seed: int) -> np.ndarray:
    return make_rng(seed + 1).uniform(-1, 1, size=L)


# ==========================================================================
# FORWARD MODEL
# ==========================================================================

def test_offset_only_kernel():
    k = VolterraKernel(0.1, np.zeros(4), np.zeros(10))
    y = apply(k, Pulse(np.arange(6.0), dt=0.5))
    assert len(y) == 6 + 4 - 1
    assert np.allclose(y.samples, 0.1)
    assert y.dt == 0.5


def test_identity_channel():
    x = Pulse(random_input(9, 0), dt=0.01, label="x")
    y = apply(identity_kernel(), x)
    assert np.array_equal(y.samples, x.samples)
    assert y.label == "x"


def test_worked_quadratic_example():
    # R=2, h1=[1, 0], only h2_01 = h2_10 = 0.5
    k = VolterraKernel(0.0, [1.0, 0.0], [0.0, 0.5, 0.0])
    y = apply(k, np.array([2.0, 3.0]))
    assert np.allclose(y.samples, [2.0, 9.0, 0.0], atol=1e-15)


def brute_force(k: VolterraKernel, x: np.ndarray) -> np.ndarray:
    R, L = k.memory_length, len(x)

    def at(q):
        return x[q] if 0 <= q < L else 0.0

    y = np.full(L + R - 1, k.h0)
    for n in range(L + R - 1):
        for j in range(R):
            y[n] += k.h1[j] * at(n - j)
        for a in range(R):
            for b in range(R):
                y[n] += k.h2[a, b] * at(n - a) * at(n - b)
    return y


def test_apply_matches_double_sum():
    k = random_kernel(5, seed=3)
    x = random_input(11, 3)
    assert np.allclose(apply(k, x).samples, brute_force(k, x), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(R=st.integers(1, 8), L=st.integers(1, 32))
def test_output_length_law(R, L):
    y = apply(random_kernel(R, seed=R), random_input(L, L))
    assert len(y) == L + R - 1


def test_causality_and_finite_memory():
    k = random_kernel(4, seed=5)
    x = random_input(20, 5)
    base = apply(k, x).samples
    bumped = x.copy()
    bumped[7] += 0.3
    changed = np.flatnonzero(np.abs(apply(k, bumped).samples - base) > 0)
    assert changed.min() >= 7, "outputs before the perturbed sample must not move"
    assert changed.max() <= 7 + 4 - 1, "outputs beyond the memory window must not move"


def test_superposition_fails_only_with_quadratic_part():
    x1, x2 = random_input(10, 1), random_input(10, 2)

    quadratic = random_kernel(3, seed=1)
    lhs = apply(quadratic, x1 + x2).samples
    rhs = apply(quadratic, x1).samples + apply(quadratic, x2).samples - quadratic.h0
    assert not np.allclose(lhs, rhs)

    linear = VolterraKernel(quadratic.h0, quadratic.h1, np.zeros(6))
    lhs = apply(linear, x1 + x2).samples
    rhs = apply(linear, x1).samples + apply(linear, x2).samples - linear.h0
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_output_is_exactly_quadratic_along_a_line():
    k = random_kernel(4, seed=8)
    x, d = random_input(15, 8), random_input(15, 80)
    ys = [apply(k, x + t * d).samples for t in (-1.0, 0.0, 1.0, 2.0)]
    second = [ys[0] - 2 * ys[1] + ys[2], ys[1] - 2 * ys[2] + ys[3]]
    assert np.allclose(second[0], second[1], atol=1e-10)


# ==========================================================================
# JACOBIAN
# ==========================================================================

@settings(max_examples=25, deadline=None)
@given(R=st.integers(1, 8), L=st.integers(1, 32), seed=st.integers(0, 2 ** 31 - 1))
def test_jacobian_matches_finite_differences(R, L, seed):
    k = random_kernel(R, seed)
    x = random_input(L, seed)
    analytic = jacobian(k, x)
    h = 1e-6
    numeric = np.empty_like(analytic)
    for j in range(L):
        step = np.zeros(L)
        step[j] = h
        numeric[:, j] = (apply(k, x + step).samples - apply(k, x - step).samples) / (2 * h)
    assert analytic.shape == (L + R - 1, L)
    assert np.max(np.abs(analytic - numeric)) <= 1e-7 * (1 + np.max(np.abs(analytic)))


def test_linear_jacobian_is_banded_convolution():
    h1 = np.array([0.5, 0.3, 0.2])
    k = VolterraKernel(0.0, h1, np.zeros(6))
    jac = jacobian(k, random_input(5, 0))
    for j in range(5):
        column = np.zeros(7)
        column[j:j + 3] = h1
        assert np.array_equal(jac[:, j], column), f"column {j} is not h1 shifted by {j}"


def test_jacobian_at_zero_input_ignores_h2():
    k = random_kernel(4, seed=2)
    linear = VolterraKernel(k.h0, k.h1, np.zeros(10))
    assert np.array_equal(jacobian(k, np.zeros(6)), jacobian(linear, np.zeros(6)))


# ==========================================================================
# COEFFICIENTS AND KERNEL CONSTRUCTION
# ==========================================================================

def test_coefficient_counts():
    assert coefficient_count(2) == 6
    assert coefficient_count(50) == 1326
    assert coefficient_count(60) == 1891
    assert make_preset_kernel("C").coefficient_count == 1326


def test_canonical_coefficient_order():
    k = VolterraKernel.from_matrix(0.1, [1.0, 2.0], [[3.0, 4.0], [4.0, 5.0]])
    assert np.array_equal(to_coefficients(k), [0.1, 1.0, 2.0, 3.0, 8.0, 5.0]), \
        "off-diagonal entry is stored doubled"


def test_coefficient_round_trip():
    k = random_kernel(7, seed=4)
    back = from_coefficients(to_coefficients(k), 7)
    assert np.array_equal(back.h2_packed, k.h2_packed)
    x = random_input(13, 4)
    assert np.array_equal(apply(back, x).samples, apply(k, x).samples)


def test_wrong_coefficient_count_names_m():
    with pytest.raises(ValidationError, match="M=6"):
        from_coefficients(np.zeros(5), 2)


def test_gaussian_kernel_shape():
    k = make_gaussian_kernel(R=50, sigma1=11.0, sigma2=8.5)
    assert k.h1[0] == pytest.approx(1.0 / (11.0 * np.sqrt(2 * np.pi)))
    assert np.argmax(k.h1) == 0
    assert np.allclose(k.h2, k.h2.T)
    assert k.h2[0, 0] == pytest.approx(5e-6)

    linear = make_gaussian_kernel(R=10, sigma1=1.0, sigma2=4.25, J=0.0)
    assert linear.is_linear

    shifted = make_gaussian_kernel(R=10, sigma1=2.0, sigma2=2.0, mu=4.0, mu1=2.0, mu2=6.0)
    assert np.argmax(shifted.h1) == 4
    assert np.allclose(shifted.h2, shifted.h2.T), "unequal centres are symmetrized"


def test_truncate_pad_and_memory_estimate():
    k = make_preset_kernel("D")
    padded = pad(k, 30)
    assert padded.memory_length == 30
    assert np.all(padded.h1[20:] == 0)
    assert np.array_equal(truncate(padded, 20).h2_packed, k.h2_packed)
    assert estimate_memory_length(padded) <= 20
    assert estimate_memory_length(zero_kernel(4)) == 1

    with pytest.raises(ValidationError):
        truncate(k, 21)
    with pytest.raises(ValidationError):
        pad(k, 10)


def test_kernel_file_round_trip(tmp_path):
    k = random_kernel(6, seed=12)
    path = write_kernel(tmp_path / "k.json", k)
    data = json.loads(path.read_text())
    assert data["convention"] == "symmetric-h2"
    assert len(data["h2_packed"]) == 21

    back = read_kernel(path)
    assert back.h0 == k.h0
    assert np.array_equal(back.h1, k.h1)
    assert np.array_equal(back.h2_packed, k.h2_packed)


def test_kernel_file_errors(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        read_kernel(tmp_path / "missing.json")

    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"R": 2, "h0": 0.0, "h1": [1.0, 0.0], "h2_packed": [0.0, 0.0]}))
    with pytest.raises(ValidationError, match="h2_packed"):
        read_kernel(path)


# ==========================================================================
# PRESETS
# ==========================================================================

def test_named_presets():
    assert get_preset("C") == {"R": 50, "sigma1": 11.0, "sigma2": 8.50, "J": 5e-6, "h0": 0.1}
    assert get_preset("F")["R"] == 60 and get_preset("F")["sigma1"] == 1.0
    assert [make_preset_kernel(name).memory_length for name in NAMED_DISTORTIONS] == \
        [50, 50, 50, 20, 40, 60]

    small = make_preset_kernel(R=5, sigma1=0.1, sigma2=0.42)
    assert small.memory_length == 5
    assert np.array_equal(small.h1, make_preset_kernel("small").h1)
    print("✓ Distortion presets passed")


def test_unknown_preset_lists_valid_names():
    with pytest.raises(ValidationError) as excinfo:
        get_preset("Z")
    message = str(excinfo.value)
    for name in DISTORTION_PRESETS:
        assert name in message

    with pytest.raises(ValidationError, match="sigma2"):
        make_preset_kernel(R=5, sigma1=1.0)
