"""Physical and optimizer parameter configuration."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Dict, Optional, Tuple

from models import ValidationError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RydbergSystem:
    """Rates and detunings of the g - p - r ladder, all in rad/us."""
    # ==========================================================================
    # DETUNINGS
    # ==========================================================================
    Delta: float = 0.0  # single-photon detuning
    delta: float = 0.0  # two-photon detuning

    # ==========================================================================
    # DISSIPATION
    # ==========================================================================
    Gamma: float = TWO_PI * 1.41  # total decay out of |p>
    Gamma_d: float = TWO_PI * 0.043  # Rydberg dephasing

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("Delta", "delta", "Gamma", "Gamma_d"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.Gamma < 0 or self.Gamma_d < 0:
            raise ValidationError(
                f"rates must be non-negative, got Gamma={self.Gamma}, Gamma_d={self.Gamma_d}")

    @property
    def Gamma_g(self) -> float:
        """Decay back to |g>."""
        return self.Gamma / 3.0

    @property
    def Gamma_gp(self) -> float:
        """Decay to the other ground sublevels |g'>."""
        return self.Gamma - self.Gamma_g

    @classmethod
    def from_mhz(cls, gamma_mhz: float = 1.41, gamma_d_mhz: float = 0.043,
                 delta_1: float = 0.0, delta_2: float = 0.0) -> "RydbergSystem":
        """Build from values in MHz (multiplied by 2*pi)."""
        return cls(Delta=TWO_PI * delta_1, delta=TWO_PI * delta_2,
                   Gamma=TWO_PI * gamma_mhz, Gamma_d=TWO_PI * gamma_d_mhz)


@dataclass
class OptimizerConfig:
    """Settings shared by the excitation optimizer and pre-distortion."""
    # Iteration budget
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    step_scale: float = 5.0  # first trial step of penalty-pg: max per-sample change, rad/us
    history_size: int = 10  # quasi-Newton memory
    mode: str = "box-qn"  # or "penalty-pg"

    # Amplitude box per control, rad/us: (blue, red)
    box_bounds: Tuple[Tuple[float, float], Tuple[float, float]] = (
        (0.0, TWO_PI * 30.0), (0.0, TWO_PI * 30.0))

    # Rise speed: max |u(j+1) - u(j)| / dt in rad/us^2. None derives it from
    # upper bound / rise time.
    rise_speed_limit: Optional[Tuple[float, float]] = None
    rise_times: Tuple[float, float] = (0.15, 0.1)  # us, (blue, red)
    rise_penalty_weight: float = 100.0

    # Initial guess
    initial_perturbation: float = 0.0  # relative std of seeded noise on the STIRAP guess
    seed: int = 0

    # Pre-distortion
    huber_delta: float = 1e-8

    def __post_init__(self):
        self.box_bounds = tuple(tuple(float(v) for v in pair) for pair in self.box_bounds)
        if self.rise_speed_limit is not None:
            self.rise_speed_limit = tuple(float(v) for v in self.rise_speed_limit)
        self.rise_times = tuple(float(v) for v in self.rise_times)
        self.validate()

    def validate(self) -> None:
        if self.max_iterations < 0:
            raise ValidationError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.gradient_tolerance <= 0 or self.step_scale <= 0 or self.huber_delta <= 0:
            raise ValidationError("tolerances and step_scale must be positive")
        if self.history_size < 1:
            raise ValidationError("history_size must be >= 1")
        if self.mode not in ("box-qn", "penalty-pg"):
            raise ValidationError(f"unknown optimizer mode '{self.mode}', valid: box-qn, penalty-pg")
        if len(self.box_bounds) != 2:
            raise ValidationError("box_bounds needs one [lo, hi] pair per control")
        for lo, hi in self.box_bounds:
            if lo > hi:
                raise ValidationError(f"box bound lo={lo} exceeds hi={hi}")
        if self.rise_penalty_weight < 0:
            raise ValidationError("rise_penalty_weight must be non-negative")
        if any(t <= 0 for t in self.rise_times):
            raise ValidationError("rise_times must be positive")
        if self.rise_speed_limit is not None and any(s <= 0 for s in self.rise_speed_limit):
            raise ValidationError("rise_speed_limit must be positive")

    def rise_limits(self) -> Tuple[float, float]:
        """Per-control slope limit in rad/us^2."""
        if self.rise_speed_limit is not None:
            return self.rise_speed_limit
        return tuple(hi / t for (_, hi), t in zip(self.box_bounds, self.rise_times))

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "OptimizerConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"unknown optimizer config keys: {unknown}")
        return cls(**values)


@dataclass
class ReproduceConfig:
    """Grids for the figure-level sweeps (coarsened for desk-scale runtime)."""
    # Kernel recovery / linear vs quadratic
    recovery_steps: int = 4000
    recovery_amplitude: float = 1000.0  # training amplitude for kernel recovery
    recovery_noise: float = 1e-4
    recovery_memory: int = 60
    comparison_test_pulses: int = 10

    # Training-pulse dt such that (R - 1) * dt = stretch_us
    stretch_us: float = 0.25

    # Orthogonalization and frequency studies
    pulse_steps: int = 500
    test_pulses: int = 50
    memory_grid: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    pulse_count_grid: Tuple[int, ...] = (1, 2, 3, 4, 6, 8)
    fixed_pulses: int = 4
    fixed_memory: int = 5
    noise_levels: Tuple[float, ...] = (0.0, 1e-9)
    frequency_budget: int = 2  # pulses per type at equal data budget
    spline_knots: int = 100

    # Excitation sweeps
    durations: Tuple[float, ...] = (0.1, 0.15, 0.2, 0.3, 0.4)
    control_dt: float = 0.002  # us
    corrected_presets: Tuple[str, ...] = ("C", "F")

    # Pre-distortion of a Gaussian target: steps, width as a fraction of steps, amplitude
    predistort_steps: int = 600
    predistort_width_fraction: float = 0.1
    predistort_amplitude: float = 5.0

    def __post_init__(self):
        for name in ("memory_grid", "pulse_count_grid", "noise_levels", "durations",
                     "corrected_presets"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.recovery_steps < 1 or self.pulse_steps < 2 or self.test_pulses < 1:
            raise ValidationError("pulse lengths and test pulse count must be positive")
        if any(m < 1 for m in self.memory_grid) or any(c < 1 for c in self.pulse_count_grid):
            raise ValidationError("memory and pulse-count grids must be positive")
        if any(T <= 0 for T in self.durations) or self.control_dt <= 0:
            raise ValidationError("durations and control_dt must be positive")
        if self.predistort_steps < 2 or self.predistort_width_fraction <= 0:
            raise ValidationError("predistort_steps must be >= 2 and the width fraction positive")

    def training_dt(self, memory_length: int) -> float:
        """Sample spacing for which the distortion rings out for stretch_us."""
        return self.stretch_us / max(memory_length - 1, 1)

    def control_steps(self, duration: float) -> int:
        return max(1, int(round(duration / self.control_dt)))

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ReproduceConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"unknown reproduce config keys: {unknown}")
        return cls(**values)
