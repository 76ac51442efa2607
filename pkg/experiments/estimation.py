"""Least-squares estimation of Volterra kernels from input/output pairs."""
from __future__ import annotations

import logging
from typing import Dict, List, Sequence

import numpy as np
import scipy.linalg

from models import (EstimateReport, EstimationProblem, NumericalError, Pulse, TrainingPair,
                    UndefinedScaleError, ValidationError, VolterraKernel, coefficient_count)
from pulses import add_measurement_noise
from volterra import apply, from_coefficients, lagged_inputs, pad, quadratic_products

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12

METHODS = ("qr", "normal", "linear")


# ==========================================================================
# DESIGN MATRIX
# ==========================================================================

def _fit_output(pair: TrainingPair, index: int, R: int, strict: bool) -> np.ndarray:
    name = pair.name or f"#{index}"
    if not np.isclose(pair.input.dt, pair.output.dt, rtol=1e-9, atol=0.0):
        raise ValidationError(
            f"training pair {name}: input dt={pair.input.dt} but output dt={pair.output.dt}")
    expected = len(pair.input) + R - 1
    y = pair.output.samples
    if y.size == expected:
        return y
    if strict:
        raise ValidationError(
            f"training pair {name}: output has {y.size} samples, expected {expected} for R={R}")
    logger.warning("training pair %s: output length %d != %d, %s to fit",
                   name, y.size, expected, "truncating" if y.size > expected else "zero-padding")
    fitted = np.zeros(expected)
    fitted[:min(expected, y.size)] = y[:expected]
    return fitted


def build_design_matrix(pairs: Sequence[TrainingPair], R: int, quadratic: bool = True,
                        strict: bool = False) -> EstimationProblem:
    """Stack the regression rows of every pair.

    Columns: ones, lags x_{n-j} for j < R, then (if `quadratic`) products
    x_{n-a} x_{n-b} for a <= b. Each pair starts from zero history.

    Args:
        pairs: Training pairs
        R: Memory length to estimate
        quadratic: Include the quadratic columns
        strict: Reject (instead of truncating/padding) outputs of the wrong length
    """
    if int(R) != R or R < 1:
        raise ValidationError(f"memory length must be a positive integer, got {R}")
    if len(pairs) == 0:
        raise ValidationError("at least one training pair is required")
    blocks, targets, boundaries = [], [], [0]
    for i, pair in enumerate(pairs):
        y = _fit_output(pair, i, R, strict)
        lags = lagged_inputs(pair.input.samples, R)
        columns = [np.ones((lags.shape[0], 1)), lags]
        if quadratic:
            columns.append(quadratic_products(lags))
        blocks.append(np.hstack(columns))
        targets.append(y)
        boundaries.append(boundaries[-1] + lags.shape[0])
    return EstimationProblem(
        design=np.vstack(blocks),
        observations=np.concatenate(targets),
        memory_length=int(R),
        pair_boundaries=np.array(boundaries),
        quadratic=quadratic,
    )


def _decode(p: EstimationProblem, coefficients: np.ndarray) -> VolterraKernel:
    R = p.memory_length
    if p.quadratic:
        return from_coefficients(coefficients, R)
    full = np.zeros(coefficient_count(R))
    full[:1 + R] = coefficients
    return from_coefficients(full, R)


def _check_problem(p: EstimationProblem) -> None:
    if p.rows < 1:
        raise ValidationError("estimation problem has no rows")
    if p.rows < p.columns:
        logger.warning("only %d rows for %d coefficients; the solution is not unique",
                       p.rows, p.columns)


def _report(p: EstimationProblem, coefficients: np.ndarray, rank_deficient: bool,
            condition: float, method: str, rank: int) -> EstimateReport:
    if not np.all(np.isfinite(coefficients)):
        raise NumericalError(f"{method} solve produced non-finite coefficients")
    residual = float(np.linalg.norm(p.observations - p.design @ coefficients))
    if rank_deficient:
        logger.warning("%s: design matrix is rank deficient (rank %d of %d columns)",
                       method, rank, p.columns)
    return EstimateReport(kernel=_decode(p, coefficients), residual_norm=residual,
                          rank_deficient=rank_deficient, condition_estimate=condition,
                          method=method, rows=p.rows, rank=rank)


# ==========================================================================
# SOLVERS
# ==========================================================================

def solve_orthogonalized(p: EstimationProblem, tol: float = RANK_TOLERANCE,
                         method: str = "qr") -> EstimateReport:
    """Least squares via column-pivoted QR of U (U^T U is never formed).

    Rank is the number of |R_ii| above tol * |R_00|; a rank-deficient problem
    falls back to the minimum-norm SVD solution.
    """
    _check_problem(p)
    U, Y = p.design, p.observations
    q, r, perm = scipy.linalg.qr(U, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    largest = diagonal[0] if diagonal.size else 0.0
    if largest == 0.0:
        # U identically zero
        return _report(p, np.zeros(p.columns), True, np.inf, method, 0)
    rank = int(np.sum(diagonal > tol * largest))
    rank_deficient = rank < p.columns
    if rank_deficient:
        coefficients = scipy.linalg.lstsq(U, Y, cond=tol)[0]
        condition = np.inf
    else:
        solution = scipy.linalg.solve_triangular(r, q.T @ Y, lower=False)
        coefficients = np.empty_like(solution)
        coefficients[perm] = solution
        condition = float(largest / diagonal[-1])
    return _report(p, coefficients, rank_deficient, condition, method, rank)


def solve_normal_equations(p: EstimationProblem) -> EstimateReport:
    """Least squares through U^T U K = U^T Y (Cholesky, pseudo-inverse fallback)."""
    _check_problem(p)
    U, Y = p.design, p.observations
    gram = U.T @ U
    rhs = U.T @ Y
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=True)
        coefficients = scipy.linalg.cho_solve(factor, rhs)
        diagonal = np.abs(np.diag(factor[0]))
        condition = float((diagonal.max() / diagonal.min()) ** 2)
        rank_deficient = not np.all(np.isfinite(coefficients))
        rank = p.columns
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        rank_deficient = True
    if rank_deficient:
        coefficients, rank = scipy.linalg.pinvh(gram, return_rank=True)
        coefficients = coefficients @ rhs
        condition = np.inf
    return _report(p, coefficients, rank_deficient, condition, "normal", rank)


def solve_linear_only(pairs: Sequence[TrainingPair], R: int,
                      strict: bool = False) -> EstimateReport:
    """Offset plus linear impulse response; the returned h2 is zero."""
    problem = build_design_matrix(pairs, R, quadratic=False, strict=strict)
    return solve_orthogonalized(problem, method="linear")


def estimate(pairs: Sequence[TrainingPair], R: int, method: str = "qr",
             strict: bool = False) -> EstimateReport:
    """Build and solve with one of `qr`, `normal` or `linear`."""
    if method == "linear":
        return solve_linear_only(pairs, R, strict=strict)
    if method not in METHODS:
        raise ValidationError(f"unknown estimation method '{method}', valid: {', '.join(METHODS)}")
    problem = build_design_matrix(pairs, R, strict=strict)
    if method == "normal":
        return solve_normal_equations(problem)
    return solve_orthogonalized(problem)


# ==========================================================================
# ERROR METRICS
# ==========================================================================

def mase(z_true, z_est) -> float:
    """Mean absolute difference of the two sequences after unit normalization."""
    a = np.ravel(np.asarray(getattr(z_true, "samples", z_true), dtype=float))
    b = np.ravel(np.asarray(getattr(z_est, "samples", z_est), dtype=float))
    if a.size != b.size:
        raise ValidationError(f"MASE needs equal lengths, got {a.size} and {b.size}")
    if a.size == 0:
        raise ValidationError("MASE of empty sequences")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise UndefinedScaleError("undefined scale: MASE of an identically zero sequence")
    return float(np.mean(np.abs(a / norm_a - b / norm_b)))


def kernel_mase(k_true: VolterraKernel, k_est: VolterraKernel) -> Dict[str, float]:
    """Per-order MASE after padding both kernels to a common memory length."""
    R = max(k_true.memory_length, k_est.memory_length)
    a, b = pad(k_true, R), pad(k_est, R)
    return {"h1": mase(a.h1, b.h1), "h2": mase(a.h2, b.h2)}


def make_training_pairs(kernel: VolterraKernel, inputs: Sequence[Pulse], noise_sigma: float = 0.0,
                        seed: int = 0, memory_length: int | None = None) -> List[TrainingPair]:
    """Distort every input and add measurement noise to the outputs.

    Args:
        kernel: True distortion
        inputs: Training inputs
        noise_sigma: Standard deviation of the additive output noise
        seed: Noise seed of the first pair (pair i uses seed + i)
        memory_length: Record L + memory_length - 1 output samples; beyond the
            kernel's own memory the output rings out at h0. None keeps the
            kernel's memory length.
    """
    R = kernel.memory_length if memory_length is None else int(memory_length)
    if R < 1:
        raise ValidationError(f"memory length must be a positive integer, got {memory_length}")
    source = pad(kernel, R) if R > kernel.memory_length else kernel
    pairs = []
    for i, x in enumerate(inputs):
        y = apply(source, x)
        y = y.with_samples(y.samples[:len(x) + R - 1])
        y = add_measurement_noise(y, noise_sigma, seed=seed + i)
        pairs.append(TrainingPair(x, y, f"pair{i:03d}"))
    return pairs


def prediction_errors(k_true: VolterraKernel, k_est: VolterraKernel,
                      test_inputs: Sequence[Pulse]) -> np.ndarray:
    """MASE between true and predicted outputs for every test input.

    Both kernels are padded to the longer memory so the outputs cover the same span.
    """
    R = max(k_true.memory_length, k_est.memory_length)
    a, b = pad(k_true, R), pad(k_est, R)
    return np.array([mase(apply(a, x), apply(b, x)) for x in test_inputs])
