"""Lindblad dynamics of the driven g - p - r Rydberg ladder.

Basis order is (|g>, |p>, |r>, |g'>). Density matrices are vectorized
column-major, so vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
import scipy.linalg

from models import ControlSchedule, NumericalError, Trajectory, ValidationError
from parameters import RydbergSystem

logger = logging.getLogger(__name__)

G, P, R, GP = 0, 1, 2, 3
DIM = 4
_IDENTITY = np.eye(DIM, dtype=complex)


def projector(level: int) -> np.ndarray:
    """|level><level| as a 4x4 density matrix."""
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[level, level] = 1.0
    return rho


def _transition(target: int, source: int) -> np.ndarray:
    op = np.zeros((DIM, DIM), dtype=complex)
    op[target, source] = 1.0
    return op


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(DIM, DIM, order="F")


# ==========================================================================
# GENERATORS
# ==========================================================================

# Control Hamiltonians per unit Rabi frequency
H_BLUE = 0.5 * (_transition(G, P) + _transition(P, G))
H_RED = 0.5 * (_transition(P, R) + _transition(R, P))


def hamiltonian(sys: RydbergSystem, ob: float, or_: float) -> np.ndarray:
    """
    Ladder Hamiltonian for one piecewise-constant step.

    Parameters
    ----------
    sys : RydbergSystem
        Detunings (rates are unused here).
    ob : float
        Blue (g-p) Rabi frequency in rad/us.
    or_ : float
        Red (p-r) Rabi frequency in rad/us.

    Returns
    -------
    np.ndarray
        4x4 Hermitian matrix; |g'> is uncoupled.
    """
    H = ob * H_BLUE + or_ * H_RED
    H[P, P] -= sys.Delta
    H[R, R] -= sys.delta
    return H


def _commutator_superop(H: np.ndarray) -> np.ndarray:
    # -i[H, rho]
    return -1j * (np.kron(_IDENTITY, H) - np.kron(H.T, _IDENTITY))


def jump_operators(sys: RydbergSystem) -> List[np.ndarray]:
    """Decay p->g, decay p->g' and Rydberg dephasing."""
    return [
        np.sqrt(sys.Gamma_g) * _transition(G, P),
        np.sqrt(sys.Gamma_gp) * _transition(GP, P),
        np.sqrt(sys.Gamma_d) * _transition(R, R),
    ]


def dissipator(sys: RydbergSystem) -> np.ndarray:
    """Sum over jumps of V rho V^dag - {V^dag V, rho}/2 as a 16x16 matrix."""
    D = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for V in jump_operators(sys):
        VdV = V.conj().T @ V
        D += np.kron(V.conj(), V)
        D -= 0.5 * (np.kron(_IDENTITY, VdV) + np.kron(VdV.T, _IDENTITY))
    return D


def generators(sys: RydbergSystem) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drift and per-unit-control Liouvillians (L0, Lb, Lr); L = L0 + ob Lb + or Lr."""
    drift = _commutator_superop(hamiltonian(sys, 0.0, 0.0)) + dissipator(sys)
    return drift, _commutator_superop(H_BLUE), _commutator_superop(H_RED)


def liouvillian(sys: RydbergSystem, ob: float, or_: float) -> np.ndarray:
    drift, blue, red = generators(sys)
    return drift + ob * blue + or_ * red


def step_propagator(sys: RydbergSystem, ob: float, or_: float, dt: float) -> np.ndarray:
    """exp(L dt) for constant controls over one step."""
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    return scipy.linalg.expm(liouvillian(sys, ob, or_) * dt)


def propagator_and_derivative(A: np.ndarray, E: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """exp(A) and its Frechet derivative along E.

    Both come out of one exponential of the block matrix [[A, E], [0, A]]:
    the diagonal block is exp(A), the upper-right block the derivative.
    """
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, :n] = A
    block[n:, n:] = A
    block[:n, n:] = E
    expanded = scipy.linalg.expm(block)
    return expanded[:n, :n], expanded[:n, n:]


# ==========================================================================
# PROPAGATION AND COST
# ==========================================================================

def _check_schedule(controls: ControlSchedule) -> None:
    if controls.steps < 1:
        raise ValidationError("control schedule has no steps")


def propagate(sys: RydbergSystem, controls: ControlSchedule, rho0: np.ndarray,
              rho_target: np.ndarray = None) -> Trajectory:
    """Apply the step propagators in order, keeping every intermediate state."""
    _check_schedule(controls)
    drift, blue, red = generators(sys)
    dt = controls.dt
    state = vec(rho0)
    states = [unvec(state).copy()]
    for ob, or_ in zip(controls.omega_b.samples, controls.omega_r.samples):
        state = scipy.linalg.expm((drift + ob * blue + or_ * red) * dt) @ state
        states.append(unvec(state).copy())
    trajectory = Trajectory(states=states)
    if rho_target is not None:
        trajectory.final_cost = cost(trajectory.final_state, rho_target)
    return trajectory


def populations(trajectory: Trajectory) -> np.ndarray:
    """Diagonal of every state, shape (steps + 1, 4)."""
    return np.array([np.real(np.diag(rho)) for rho in trajectory.states])


def _overlap(rho_T: np.ndarray, rho_target: np.ndarray) -> complex:
    return complex(np.trace(np.asarray(rho_target).conj().T @ rho_T))


def cost(rho_T: np.ndarray, rho_target: np.ndarray) -> float:
    """1 - |Tr(rho_target^dag rho_T)|^2."""
    return float(1.0 - abs(_overlap(rho_T, rho_target)) ** 2)


def cost_and_gradient(sys: RydbergSystem, controls: ControlSchedule, rho0: np.ndarray,
                      rho_target: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Cost and its gradient with respect to every control sample.

    Parameters
    ----------
    sys : RydbergSystem
    controls : ControlSchedule
        Piecewise-constant Rabi frequencies in rad/us.
    rho0, rho_target : np.ndarray
        Initial and (pure) target density matrices.

    Returns
    -------
    tuple
        (cost, dC/d omega_b, dC/d omega_r); each gradient has one entry per step.

    Notes
    -----
    One forward pass stores the states rho_j; the backward pass carries the
    costate lambda_j = P_{j+1}^dag ... P_L^dag vec(rho_target), so that the
    overlap f = <lambda_j, P_j rho_{j-1}> for every j and
    dC/du = -2 Re(conj(f) <lambda_j, dP_j/du rho_{j-1}>).
    """
    _check_schedule(controls)
    drift, blue, red = generators(sys)
    dt = controls.dt
    ob_samples = controls.omega_b.samples
    or_samples = controls.omega_r.samples
    steps = controls.steps

    propagators, d_blue, d_red = [], [], []
    forward = [vec(rho0)]
    for j in range(steps):
        A = (drift + ob_samples[j] * blue + or_samples[j] * red) * dt
        step, derivative_b = propagator_and_derivative(A, blue * dt)
        _, derivative_r = propagator_and_derivative(A, red * dt)
        propagators.append(step)
        d_blue.append(derivative_b)
        d_red.append(derivative_r)
        forward.append(step @ forward[-1])

    target = vec(rho_target)
    overlap = np.vdot(target, forward[-1])
    value = float(1.0 - abs(overlap) ** 2)

    grad_b = np.empty(steps)
    grad_r = np.empty(steps)
    costate = target
    for j in range(steps - 1, -1, -1):
        grad_b[j] = -2.0 * np.real(np.conj(overlap) * np.vdot(costate, d_blue[j] @ forward[j]))
        grad_r[j] = -2.0 * np.real(np.conj(overlap) * np.vdot(costate, d_red[j] @ forward[j]))
        costate = propagators[j].conj().T @ costate

    if not (np.isfinite(value) and np.all(np.isfinite(grad_b)) and np.all(np.isfinite(grad_r))):
        raise NumericalError("non-finite cost or gradient in Lindblad propagation")
    return value, grad_b, grad_r


def cost_gradient(sys: RydbergSystem, controls: ControlSchedule, rho0: np.ndarray,
                  rho_target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, grad_b, grad_r = cost_and_gradient(sys, controls, rho0, rho_target)
    return grad_b, grad_r


def excitation_problem() -> Tuple[np.ndarray, np.ndarray]:
    """Initial |g><g| and target |r><r|."""
    return projector(G), projector(R)
