"""Data models for pulses, Volterra kernels, estimation and control results."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional

import numpy as np


# ==========================================================================
# ERRORS
# ==========================================================================

class VolterraError(Exception):
    """Base class for all errors raised by the distortion toolkit."""


class ValidationError(VolterraError, ValueError):
    """Invalid argument, configuration or input file."""


class PulseFormatError(ValidationError):
    """Malformed pulse CSV file."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UndefinedScaleError(ValidationError):
    """MASE requested on an identically zero sequence."""


class NumericalError(VolterraError, RuntimeError):
    """Non-finite values or a breakdown inside a numerical routine."""


def _frozen_array(values, name: str, ndim: int = 1) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ==========================================================================
# PULSES
# ==========================================================================

@dataclass(frozen=True, eq=False)
class Pulse:
    """Sampled real-valued pulse.

    Training signals are dimensionless; Rabi-frequency controls are in rad/us.
    `dt` is the sample spacing in us.
    """
    samples: np.ndarray
    dt: float = 1.0
    label: str = ""

    def __post_init__(self):
        samples = _frozen_array(self.samples, "samples")
        if samples.size == 0:
            raise ValidationError("empty pulse")
        if not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples))[0])
            raise ValidationError(f"non-finite amplitude at sample {bad}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "label", str(self.label))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    def with_samples(self, samples, label: Optional[str] = None) -> "Pulse":
        """Same dt (and label unless given) with new amplitudes."""
        return Pulse(samples, self.dt, self.label if label is None else label)


@dataclass(frozen=True)
class TrainingPair:
    """One measured input/output pulse pair."""
    input: Pulse
    output: Pulse
    name: str = ""


# ==========================================================================
# VOLTERRA KERNELS
# ==========================================================================

def coefficient_count(memory_length: int) -> int:
    """Number of flattened coefficients M = 1 + R + R(R+1)/2."""
    R = int(memory_length)
    return 1 + R + R * (R + 1) // 2


@dataclass(frozen=True, eq=False)
class VolterraKernel:
    """Second-order causal Volterra kernel with finite memory.

    `h2_packed` holds the row-major upper triangle (a <= b) of the symmetric
    quadratic kernel, so an asymmetric h2 cannot be represented.
    """
    h0: float
    h1: np.ndarray
    h2_packed: np.ndarray

    def __post_init__(self):
        h1 = _frozen_array(self.h1, "h1")
        h2_packed = _frozen_array(self.h2_packed, "h2_packed")
        R = h1.size
        if R < 1:
            raise ValidationError("memory length must be at least 1")
        if h2_packed.size != R * (R + 1) // 2:
            raise ValidationError(
                f"h2_packed must have {R * (R + 1) // 2} entries for R={R}, got {h2_packed.size}")
        if not (np.isfinite(self.h0) and np.all(np.isfinite(h1)) and np.all(np.isfinite(h2_packed))):
            raise ValidationError("kernel coefficients must be finite")
        object.__setattr__(self, "h0", float(self.h0))
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2_packed", h2_packed)

    @property
    def memory_length(self) -> int:
        return int(self.h1.size)

    @property
    def coefficient_count(self) -> int:
        return coefficient_count(self.memory_length)

    @cached_property
    def h2(self) -> np.ndarray:
        """Full symmetric R x R quadratic kernel."""
        R = self.memory_length
        rows, cols = np.triu_indices(R)
        full = np.zeros((R, R))
        full[rows, cols] = self.h2_packed
        full[cols, rows] = self.h2_packed
        full.setflags(write=False)
        return full

    @property
    def is_linear(self) -> bool:
        return not np.any(self.h2_packed)

    @classmethod
    def from_matrix(cls, h0: float, h1, h2) -> "VolterraKernel":
        """Build from a full quadratic kernel matrix (symmetrized first)."""
        h2 = np.asarray(h2, dtype=float)
        R = np.asarray(h1).size
        if h2.shape != (R, R):
            raise ValidationError(f"h2 must have shape ({R}, {R}), got {h2.shape}")
        sym = 0.5 * (h2 + h2.T)
        return cls(h0, h1, sym[np.triu_indices(R)])


# ==========================================================================
# ESTIMATION
# ==========================================================================

@dataclass
class EstimationProblem:
    """Stacked least-squares problem Y = U K."""
    design: np.ndarray
    observations: np.ndarray
    memory_length: int
    pair_boundaries: np.ndarray
    quadratic: bool = True  # False: columns 0..R only

    @property
    def rows(self) -> int:
        return int(self.design.shape[0])

    @property
    def columns(self) -> int:
        return int(self.design.shape[1])


@dataclass
class EstimateReport:
    """Estimated kernel plus solver diagnostics."""
    kernel: VolterraKernel
    residual_norm: float
    rank_deficient: bool
    condition_estimate: float
    method: str = "qr"
    rows: int = 0
    rank: Optional[int] = None


# ==========================================================================
# CONTROL
# ==========================================================================

@dataclass(frozen=True)
class ControlSchedule:
    """Blue (g-p) and red (p-r) Rabi frequency pulses in rad/us."""
    omega_b: Pulse
    omega_r: Pulse

    def __post_init__(self):
        if len(self.omega_b) != len(self.omega_r):
            raise ValidationError(
                f"control lengths differ: omega_b={len(self.omega_b)}, omega_r={len(self.omega_r)}")
        if not np.isclose(self.omega_b.dt, self.omega_r.dt, rtol=1e-12, atol=0.0):
            raise ValidationError(
                f"control dt differ: omega_b={self.omega_b.dt}, omega_r={self.omega_r.dt}")

    @property
    def steps(self) -> int:
        return len(self.omega_b)

    @property
    def dt(self) -> float:
        return self.omega_b.dt

    @property
    def duration(self) -> float:
        return self.steps * self.dt

    @classmethod
    def from_arrays(cls, omega_b, omega_r, dt: float) -> "ControlSchedule":
        return cls(Pulse(omega_b, dt, "omega_b"), Pulse(omega_r, dt, "omega_r"))


@dataclass
class Trajectory:
    """Density matrices at every step boundary (steps + 1 entries)."""
    states: List[np.ndarray]
    final_cost: Optional[float] = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class TerminationReason(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAILURE = "line_search_failure"


@dataclass
class OptimizationResult:
    """Outcome of one excitation optimization."""
    controls: ControlSchedule
    distorted_controls: ControlSchedule
    cost_trace: List[float]
    final_cost: float
    termination_reason: TerminationReason
    mode: str = "box-qn"
    iterations: int = 0
    penalty: float = 0.0
    events: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class PredistortionResult:
    """Pre-distorted input and the smoothed-l1 objective it reaches."""
    pulse: Pulse
    objective: float
    converged: bool
    iterations: int = 0
