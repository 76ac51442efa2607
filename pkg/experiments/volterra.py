"""Second-order Volterra kernels: forward model, Jacobian, synthesis and files.

Packed coefficient convention: the flattened vector is
[h0, h1_0 .. h1_{R-1}, c_00, c_01, .., c_{R-1,R-1}] with (a, b), a <= b, in
lexicographic order and c_ab = 2 * h2_ab for a < b, c_aa = h2_aa. With that
convention sum_{a<=b} c_ab x_{n-a} x_{n-b} equals the ordered double sum over
the symmetric h2.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models import Pulse, ValidationError, VolterraKernel, coefficient_count
from utils import atomic_write_text

logger = logging.getLogger(__name__)

KERNEL_CONVENTION = "symmetric-h2"


def _as_samples(x) -> np.ndarray:
    if isinstance(x, Pulse):
        return x.samples
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError(f"input must be a non-empty 1-D sequence, got shape {x.shape}")
    return x


def _off_diagonal_factor(R: int) -> np.ndarray:
    rows, cols = np.triu_indices(R)
    return np.where(rows == cols, 1.0, 2.0)


def lagged_inputs(x, R: int) -> np.ndarray:
    """Matrix X of shape (L + R - 1, R) with X[n, j] = x_{n-j}, zero outside [0, L)."""
    x = _as_samples(x)
    padded = np.concatenate([np.zeros(R - 1), x, np.zeros(R - 1)])
    return sliding_window_view(padded, R)[:, ::-1]


def quadratic_products(lags: np.ndarray) -> np.ndarray:
    """Columns x_{n-a} x_{n-b} for a <= b in lexicographic order."""
    rows, cols = np.triu_indices(lags.shape[1])
    return lags[:, rows] * lags[:, cols]


# ==========================================================================
# FORWARD MODEL
# ==========================================================================

def apply(k: VolterraKernel, x) -> Pulse:
    """Distort `x`; the output has L + R - 1 samples and the same dt."""
    samples = _as_samples(x)
    lags = lagged_inputs(samples, k.memory_length)
    y = k.h0 + lags @ k.h1
    if not k.is_linear:
        y = y + np.einsum("nk,kl,nl->n", lags, k.h2, lags, optimize=True)
    if isinstance(x, Pulse):
        return x.with_samples(y)
    return Pulse(y)


def jacobian(k: VolterraKernel, x) -> np.ndarray:
    """dy_n/dx_j as an (L + R - 1) x L matrix.

    Entry (n, j) is h1_{n-j} + 2 sum_l h2_{n-j, n-l} x_l, zero unless
    0 <= n - j < R.
    """
    samples = _as_samples(x)
    L = samples.size
    R = k.memory_length
    lags = lagged_inputs(samples, R)
    banded = np.broadcast_to(k.h1, lags.shape).copy()
    if not k.is_linear:
        banded += 2.0 * lags @ k.h2
    n_idx, d_idx = np.indices(banded.shape)
    j_idx = n_idx - d_idx
    valid = (j_idx >= 0) & (j_idx < L)
    jac = np.zeros((L + R - 1, L))
    jac[n_idx[valid], j_idx[valid]] = banded[valid]
    return jac


# ==========================================================================
# KERNEL CONSTRUCTION
# ==========================================================================

def make_gaussian_kernel(R: int, sigma1: float, sigma2: float, J: float = 5e-6, h0: float = 0.1,
                         mu1: float = 0.0, mu2: float = 0.0, mu: float = 0.0) -> VolterraKernel:
    """Gaussian linear and quadratic kernels truncated to lags 0..R-1.

    Args:
        R: Memory length in samples
        sigma1: Width of the linear kernel (samples)
        sigma2: Width of the quadratic kernel (samples)
        J: Quadratic kernel amplitude
        h0: Constant offset
        mu1, mu2: Quadratic kernel centre along each lag axis
        mu: Linear kernel centre

    Returns:
        VolterraKernel with h1 normalized as a Gaussian density (not renormalized
        after truncation) and h2 symmetrized.
    """
    if R < 1:
        raise ValidationError(f"memory length must be >= 1, got {R}")
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValidationError(f"sigmas must be positive, got {sigma1}, {sigma2}")
    t = np.arange(R, dtype=float)
    h1 = np.exp(-((t - mu) ** 2) / (2.0 * sigma1 ** 2)) / (sigma1 * np.sqrt(2.0 * np.pi))
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    h2 = J * np.exp(-((t1 - mu1) ** 2 + (t2 - mu2) ** 2) / (2.0 * sigma2 ** 2))
    return VolterraKernel.from_matrix(h0, h1, h2)


def identity_kernel() -> VolterraKernel:
    """Memoryless unit-gain channel."""
    return VolterraKernel(0.0, [1.0], [0.0])


def zero_kernel(R: int) -> VolterraKernel:
    return VolterraKernel(0.0, np.zeros(R), np.zeros(R * (R + 1) // 2))


def truncate(k: VolterraKernel, R: int) -> VolterraKernel:
    """Drop all coefficients at lags >= R."""
    if not 1 <= R <= k.memory_length:
        raise ValidationError(f"cannot truncate R={k.memory_length} kernel to {R}")
    h2 = k.h2[:R, :R]
    return VolterraKernel(k.h0, k.h1[:R], h2[np.triu_indices(R)])


def pad(k: VolterraKernel, R: int) -> VolterraKernel:
    """Zero-fill lags up to memory length R."""
    if R < k.memory_length:
        raise ValidationError(f"cannot pad R={k.memory_length} kernel down to {R}")
    h1 = np.zeros(R)
    h1[:k.memory_length] = k.h1
    h2 = np.zeros((R, R))
    h2[:k.memory_length, :k.memory_length] = k.h2
    return VolterraKernel(k.h0, h1, h2[np.triu_indices(R)])


def estimate_memory_length(k: VolterraKernel, rel_tol: float = 1e-3) -> int:
    """Smallest R' such that all coefficients at lags >= R' are negligible."""
    scale = max(abs(k.h0), np.max(np.abs(k.h1)), np.max(np.abs(k.h2)))
    if scale == 0:
        return 1
    # magnitude per lag: worst of h1 and the h2 row/column through that lag
    per_lag = np.maximum(np.abs(k.h1), np.max(np.abs(k.h2), axis=1))
    significant = np.flatnonzero(per_lag > rel_tol * scale)
    return int(significant[-1]) + 1 if significant.size else 1


# ==========================================================================
# COEFFICIENT VECTORS
# ==========================================================================

def to_coefficients(k: VolterraKernel) -> np.ndarray:
    """Canonical length-M vector (off-diagonal quadratic entries doubled)."""
    c = k.h2_packed * _off_diagonal_factor(k.memory_length)
    return np.concatenate([[k.h0], k.h1, c])


def from_coefficients(v, R: int) -> VolterraKernel:
    v = np.asarray(v, dtype=float)
    M = coefficient_count(R)
    if v.ndim != 1 or v.size != M:
        raise ValidationError(f"expected M={M} coefficients for R={R}, got {v.size}")
    h2_packed = v[1 + R:] / _off_diagonal_factor(R)
    return VolterraKernel(v[0], v[1:1 + R], h2_packed)


# ==========================================================================
# KERNEL FILES
# ==========================================================================

def kernel_to_dict(k: VolterraKernel) -> Dict[str, Any]:
    return {
        "R": k.memory_length,
        "h0": k.h0,
        "h1": k.h1.tolist(),
        "h2_packed": k.h2_packed.tolist(),
        "convention": KERNEL_CONVENTION,
    }


def kernel_from_dict(data: Dict[str, Any]) -> VolterraKernel:
    missing = [key for key in ("R", "h0", "h1", "h2_packed") if key not in data]
    if missing:
        raise ValidationError(f"kernel document missing keys: {missing}")
    convention = data.get("convention", KERNEL_CONVENTION)
    if convention != KERNEL_CONVENTION:
        raise ValidationError(f"unsupported kernel convention '{convention}'")
    kernel = VolterraKernel(data["h0"], data["h1"], data["h2_packed"])
    if kernel.memory_length != int(data["R"]):
        raise ValidationError(f"R={data['R']} does not match len(h1)={kernel.memory_length}")
    return kernel


def write_kernel(path: Union[str, Path], k: VolterraKernel) -> Path:
    return atomic_write_text(path, json.dumps(kernel_to_dict(k), indent=2) + "\n")


def read_kernel(path: Union[str, Path]) -> VolterraKernel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"Kernel file not found: {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid kernel JSON in {path}: {e}") from e
    return kernel_from_dict(data)
