"""Distortion-aware pulse optimization and pre-distortion."""
from __future__ import annotations

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares, minimize

from logging_utils import EventType, create_event
from models import (ControlSchedule, NumericalError, OptimizationResult, Pulse,
                    PredistortionResult, TerminationReason, ValidationError, VolterraKernel)
from parameters import OptimizerConfig, RydbergSystem
from rydberg import cost_and_gradient, excitation_problem, propagate
from utils import make_rng
from volterra import apply, jacobian

logger = logging.getLogger(__name__)

ARMIJO_SLOPE = 1e-4
MAX_BACKTRACKS = 40
# Feasible rise speed: sum(((|du/dt| - limit)_+ / limit)^2) at or below this
FEASIBILITY_TOLERANCE = 1e-6


# ==========================================================================
# GRADIENT PLUMBING
# ==========================================================================

def chain_gradient(dC_ds, k: VolterraKernel, x) -> np.ndarray:
    """Pull a gradient on the distorted pulse back onto the input: J^T dC/ds."""
    dC_ds = np.asarray(dC_ds, dtype=float)
    jac = jacobian(k, x)
    if dC_ds.ndim != 1 or dC_ds.size != jac.shape[0]:
        raise ValidationError(
            f"gradient has {dC_ds.size} entries, expected {jac.shape[0]} (= L + R - 1)")
    return jac.T @ dC_ds


def rise_speed_penalty(u, dt: float, limit: float, weight: float) -> Tuple[float, np.ndarray]:
    """Quadratic penalty on slopes exceeding `limit`, in units of the limit.

    Returns:
        (weight * sum(((|du/dt| - limit)_+ / limit)^2), gradient w.r.t. u)
    """
    u = np.asarray(u, dtype=float)
    grad = np.zeros_like(u)
    if u.size < 2 or weight == 0:
        return 0.0, grad
    slopes = np.diff(u) / dt
    excess = np.maximum(np.abs(slopes) - limit, 0.0)
    value = weight * float(np.sum((excess / limit) ** 2))
    d_slope = 2.0 * weight * excess * np.sign(slopes) / limit ** 2 / dt
    grad[1:] += d_slope
    grad[:-1] -= d_slope
    return value, grad


def distort_schedule(controls: ControlSchedule, kernel: Optional[VolterraKernel]) -> ControlSchedule:
    """Both controls through the kernel (unchanged when kernel is None)."""
    if kernel is None:
        return controls
    return ControlSchedule(apply(kernel, controls.omega_b), apply(kernel, controls.omega_r))


def stirap_initial_guess(T: float, L_c: int, cfg: OptimizerConfig) -> ControlSchedule:
    """Counter-intuitive Gaussian pair: red (p-r) leads, blue (g-p) follows.

    Both peak at mid-box amplitude with width T/6, centres T/2 -/+ T/8.
    """
    if T <= 0 or L_c < 1:
        raise ValidationError(f"duration and steps must be positive, got T={T}, L_c={L_c}")
    dt = T / L_c
    t = (np.arange(L_c) + 0.5) * dt
    width = T / 6.0
    (lo_b, hi_b), (lo_r, hi_r) = cfg.box_bounds
    omega_b = 0.5 * (lo_b + hi_b) * np.exp(-((t - 0.5 * T - T / 8.0) ** 2) / (2.0 * width ** 2))
    omega_r = 0.5 * (lo_r + hi_r) * np.exp(-((t - 0.5 * T + T / 8.0) ** 2) / (2.0 * width ** 2))
    if cfg.initial_perturbation > 0:
        rng = make_rng(cfg.seed)
        omega_b = omega_b + cfg.initial_perturbation * 0.5 * (lo_b + hi_b) * rng.normal(size=L_c)
        omega_r = omega_r + cfg.initial_perturbation * 0.5 * (lo_r + hi_r) * rng.normal(size=L_c)
    return ControlSchedule.from_arrays(np.clip(omega_b, lo_b, hi_b), np.clip(omega_r, lo_r, hi_r), dt)


# ==========================================================================
# EXCITATION OBJECTIVE
# ==========================================================================

class ExcitationObjective:
    """Transfer cost over the stacked vector [omega_b, omega_r].

    In `penalty-pg` mode the rise-speed penalty is added; `box-qn` sees the
    transfer cost alone and relies on the box bounds.
    """

    def __init__(self, sys: RydbergSystem, L_c: int, dt: float, kernel: Optional[VolterraKernel],
                 cfg: OptimizerConfig, rho0: np.ndarray, rho_target: np.ndarray):
        self.sys = sys
        self.L_c = L_c
        self.dt = dt
        self.kernel = kernel
        self.cfg = cfg
        self.rho0 = rho0
        self.rho_target = rho_target
        self.limits = cfg.rise_limits()
        self.penalty_weight = cfg.rise_penalty_weight if cfg.mode == "penalty-pg" else 0.0
        self._cache: Dict[bytes, Tuple[float, np.ndarray, float, float]] = {}

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[:self.L_c], x[self.L_c:]

    def schedule(self, x: np.ndarray) -> ControlSchedule:
        u_b, u_r = self.split(x)
        return ControlSchedule.from_arrays(u_b, u_r, self.dt)

    def evaluate(self, x: np.ndarray) -> Tuple[float, np.ndarray, float, float]:
        """(objective, gradient, transfer cost, penalty) at x."""
        key = np.asarray(x, dtype=float).tobytes()
        if key in self._cache:
            return self._cache[key]
        u_b, u_r = self.split(np.asarray(x, dtype=float))
        distorted = distort_schedule(self.schedule(x), self.kernel)
        cost, grad_b, grad_r = cost_and_gradient(self.sys, distorted, self.rho0, self.rho_target)
        if self.kernel is not None:
            grad_b = chain_gradient(grad_b, self.kernel, u_b)
            grad_r = chain_gradient(grad_r, self.kernel, u_r)
        pen_b, pen_grad_b = rise_speed_penalty(u_b, self.dt, self.limits[0], self.penalty_weight)
        pen_r, pen_grad_r = rise_speed_penalty(u_r, self.dt, self.limits[1], self.penalty_weight)
        penalty = pen_b + pen_r
        total = cost + penalty
        grad = np.concatenate([grad_b + pen_grad_b, grad_r + pen_grad_r])
        if not (np.isfinite(total) and np.all(np.isfinite(grad))):
            raise NumericalError(f"non-finite objective ({total}) or gradient")
        entry = (float(total), grad, float(cost), float(penalty))
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = entry
        return entry

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        total, grad, _, _ = self.evaluate(x)
        return total, grad


def _run_box_qn(objective: ExcitationObjective, x0: np.ndarray, bounds: List[Tuple[float, float]],
                cfg: OptimizerConfig, trace: List[float], events: List[dict]):
    def record(xk, *args):
        total = objective.evaluate(xk)[0]
        trace.append(total)
        events.append(create_event(EventType.ITERATION, len(trace) - 1, total))
        logger.debug("box-qn iteration %d: objective %.6e", len(trace) - 1, total)

    res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds, callback=record,
                   options={"maxiter": cfg.max_iterations, "gtol": cfg.gradient_tolerance,
                            "maxcor": cfg.history_size})
    message = str(res.message)
    if "ABNORMAL" in message.upper():
        reason = TerminationReason.LINE_SEARCH_FAILURE
    elif res.status == 1:
        reason = TerminationReason.MAX_ITER
    else:
        reason = TerminationReason.CONVERGED
    return np.asarray(res.x, dtype=float), reason, int(res.nit)


def _run_penalty_pg(objective: ExcitationObjective, x0: np.ndarray, lower: np.ndarray,
                    upper: np.ndarray, cfg: OptimizerConfig, trace: List[float], events: List[dict]):
    # Accepted iterates never push the penalty above max(tolerance, current penalty)
    feasible_penalty = FEASIBILITY_TOLERANCE * objective.penalty_weight
    x = x0.copy()
    total, grad, _, penalty = objective.evaluate(x)
    step = cfg.step_scale
    reason = TerminationReason.MAX_ITER
    iterations = 0
    for iteration in range(cfg.max_iterations):
        projected = x - np.clip(x - grad, lower, upper)
        if np.max(np.abs(projected)) < cfg.gradient_tolerance:
            reason = TerminationReason.CONVERGED
            break
        scale = np.max(np.abs(grad))
        cap = max(feasible_penalty, penalty)
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            candidate = np.clip(x - (step / scale) * grad, lower, upper)
            new_total, new_grad, _, new_penalty = objective.evaluate(candidate)
            if (new_total <= total - ARMIJO_SLOPE * float(grad @ (x - candidate))
                    and new_penalty <= cap):
                accepted = True
                break
            step *= 0.5
            events.append(create_event(EventType.BACKTRACK, iteration, new_total, {"step": step}))
        if not accepted:
            reason = TerminationReason.LINE_SEARCH_FAILURE
            break
        x, total, grad, penalty = candidate, new_total, new_grad, new_penalty
        iterations += 1
        trace.append(total)
        events.append(create_event(EventType.ITERATION, iterations, total, {"step": step}))
        logger.debug("penalty-pg iteration %d: objective %.6e, step %.3e", iterations, total, step)
        step *= 2.0
    return x, reason, iterations


def optimize_excitation(sys: RydbergSystem, T: float, L_c: int,
                        kernel: Optional[VolterraKernel] = None,
                        cfg: Optional[OptimizerConfig] = None,
                        initial: Optional[ControlSchedule] = None,
                        rho0: Optional[np.ndarray] = None,
                        rho_target: Optional[np.ndarray] = None) -> OptimizationResult:
    """Optimize |g> -> |r> transfer, optionally through a distortion kernel.

    Args:
        sys: Ladder rates and detunings
        T: Pulse duration in us (dt = T / L_c)
        L_c: Number of piecewise-constant control steps
        kernel: Distortion applied to both controls before simulation; the
            simulated horizon then has L_c + R - 1 steps
        cfg: Optimizer settings. `box-qn` is L-BFGS-B inside the amplitude box;
            `penalty-pg` is projected gradient with the rise-speed penalty, whose
            accepted steps never raise the penalty above FEASIBILITY_TOLERANCE
            times its weight (or above the starting penalty, if larger)
        initial: Starting controls (default: STIRAP-like guess)
        rho0, rho_target: Override the |g><g| -> |r><r| task

    Returns:
        OptimizationResult with the undistorted and distorted controls
    """
    cfg = cfg or OptimizerConfig()
    if T <= 0:
        raise ValidationError(f"duration must be positive, got {T}")
    if L_c < 1:
        raise ValidationError(f"need at least one control step, got {L_c}")
    default_rho0, default_target = excitation_problem()
    rho0 = default_rho0 if rho0 is None else rho0
    rho_target = default_target if rho_target is None else rho_target

    if initial is None:
        initial = stirap_initial_guess(T, L_c, cfg)
    elif initial.steps != L_c or not np.isclose(initial.dt, T / L_c):
        raise ValidationError(
            f"initial controls have {initial.steps} steps of {initial.dt} us, expected {L_c} of {T / L_c}")
    dt = T / L_c
    objective = ExcitationObjective(sys, L_c, dt, kernel, cfg, rho0, rho_target)

    (lo_b, hi_b), (lo_r, hi_r) = cfg.box_bounds
    lower = np.concatenate([np.full(L_c, lo_b), np.full(L_c, lo_r)])
    upper = np.concatenate([np.full(L_c, hi_b), np.full(L_c, hi_r)])
    x0 = np.clip(np.concatenate([initial.omega_b.samples, initial.omega_r.samples]), lower, upper)

    start_total = objective.evaluate(x0)[0]
    trace = [start_total]
    events = [create_event(EventType.STARTED, 0, start_total,
                           {"mode": cfg.mode, "distorted": kernel is not None})]
    if cfg.max_iterations == 0:
        x, reason, iterations = x0, TerminationReason.MAX_ITER, 0
    elif cfg.mode == "box-qn":
        x, reason, iterations = _run_box_qn(objective, x0, list(zip(lower, upper)), cfg, trace, events)
    else:
        x, reason, iterations = _run_penalty_pg(objective, x0, lower, upper, cfg, trace, events)

    x = np.clip(x, lower, upper)
    total, _, transfer_cost, penalty = objective.evaluate(x)
    event_type = {TerminationReason.CONVERGED: EventType.CONVERGED,
                  TerminationReason.MAX_ITER: EventType.MAX_ITER,
                  TerminationReason.LINE_SEARCH_FAILURE: EventType.LINE_SEARCH_FAILURE}[reason]
    events.append(create_event(event_type, iterations, total))
    if reason is TerminationReason.LINE_SEARCH_FAILURE:
        logger.warning("%s stopped on a line-search failure after %d iterations", cfg.mode, iterations)
    logger.info("%s T=%.3f us: cost %.6e after %d iterations (%s)",
                cfg.mode, T, transfer_cost, iterations, reason.value)

    controls = objective.schedule(x)
    return OptimizationResult(
        controls=controls,
        distorted_controls=distort_schedule(controls, kernel),
        cost_trace=trace,
        final_cost=transfer_cost,
        termination_reason=reason,
        mode=cfg.mode,
        iterations=iterations,
        penalty=penalty,
        events=events,
    )


def evaluate_distorted(sys: RydbergSystem, controls: ControlSchedule,
                       kernel: Optional[VolterraKernel],
                       rho0: Optional[np.ndarray] = None,
                       rho_target: Optional[np.ndarray] = None) -> float:
    """Transfer cost when both controls pass through `kernel` first."""
    default_rho0, default_target = excitation_problem()
    rho0 = default_rho0 if rho0 is None else rho0
    rho_target = default_target if rho_target is None else rho_target
    trajectory = propagate(sys, distort_schedule(controls, kernel), rho0, rho_target)
    return trajectory.final_cost


# ==========================================================================
# PRE-DISTORTION
# ==========================================================================

def _huber(residual: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    magnitude = np.abs(residual)
    quadratic = magnitude <= delta
    value = np.where(quadratic, residual ** 2 / (2.0 * delta), magnitude - 0.5 * delta)
    slope = np.clip(residual / delta, -1.0, 1.0)
    return value, slope


def predistort(kernel: VolterraKernel, target: Pulse,
               cfg: Optional[OptimizerConfig] = None) -> PredistortionResult:
    """Input of length N - R + 1 whose distorted output best matches `target`.

    Minimizes the Huber-smoothed mean absolute deviation. A least-squares
    Gauss-Newton pass from the target's first L samples provides the warm
    start for L-BFGS on the smoothed l1 objective; the best iterate wins.
    """
    cfg = cfg or OptimizerConfig()
    N = len(target)
    R = kernel.memory_length
    if N < R:
        raise ValidationError(f"target has {N} samples, needs at least R={R}")
    L = N - R + 1
    goal = target.samples
    delta = cfg.huber_delta

    def residual(x):
        return apply(kernel, x).samples - goal

    def objective(x):
        r = residual(x)
        value, slope = _huber(r, delta)
        return float(value.mean()), jacobian(kernel, x).T @ slope / N

    x0 = goal[:L].copy()
    candidates = [(objective(x0)[0], x0)]
    converged = candidates[0][0] == 0.0
    iterations = 0

    if not converged and cfg.max_iterations > 0:
        warm = least_squares(residual, x0, jac=lambda x: jacobian(kernel, x), method="trf",
                             max_nfev=cfg.max_iterations)
        x_ls = np.asarray(warm.x, dtype=float)
        candidates.append((objective(x_ls)[0], x_ls))
        res = minimize(objective, x_ls, jac=True, method="L-BFGS-B",
                       options={"maxiter": cfg.max_iterations, "maxcor": cfg.history_size,
                                "gtol": cfg.gradient_tolerance * delta})
        candidates.append((float(res.fun), np.asarray(res.x, dtype=float)))
        converged = bool(res.success)
        iterations = int(warm.nfev) + int(res.nit)

    best_value, best_x = min(candidates, key=lambda item: item[0])
    converged = converged or best_value <= delta
    if not np.all(np.isfinite(best_x)):
        raise NumericalError("pre-distortion produced non-finite samples")
    if not converged:
        logger.warning("pre-distortion did not converge; returning best iterate (objective %.3e)",
                       best_value)
    return PredistortionResult(
        pulse=Pulse(best_x, target.dt, f"predistorted({target.label})" if target.label else "predistorted"),
        objective=best_value,
        converged=converged,
        iterations=iterations,
    )
