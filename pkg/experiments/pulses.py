"""Generation, perturbation and CSV serialization of sampled pulses."""
from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import get_window

from models import Pulse, PulseFormatError, TrainingPair, ValidationError
from utils import atomic_write_text, make_rng

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^#\s*dt=(?P<dt>\S+)(?:\s+label=(?P<label>.*))?$")

INPUT_SUFFIX = ".in.csv"
OUTPUT_SUFFIX = ".out.csv"


def _check_steps(steps: int) -> int:
    if int(steps) != steps or steps < 1:
        raise ValidationError(f"steps must be a positive integer, got {steps}")
    return int(steps)


# ==========================================================================
# GENERATORS
# ==========================================================================

def generate_random_noise(steps: int, amplitude: float = 1.0, seed: int = 0,
                          dt: float = 1.0) -> Pulse:
    """I.i.d. uniform samples in [-amplitude, amplitude]."""
    steps = _check_steps(steps)
    if amplitude < 0:
        raise ValidationError(f"amplitude must be non-negative, got {amplitude}")
    rng = make_rng(seed)
    samples = amplitude * rng.uniform(-1.0, 1.0, size=steps)
    return Pulse(samples, dt, f"noise(seed={seed})")


def generate_spline(steps: int, knots: int, seed: int = 0, dt: float = 1.0) -> Pulse:
    """Natural cubic spline through uniformly spaced random knots.

    Knot ordinates are uniform in [-1, 1]; knots sit at evenly spaced sample
    positions including both ends, so more knots means more spectral content.
    """
    steps = _check_steps(steps)
    if knots < 2:
        raise ValidationError(f"a spline needs at least 2 knots, got {knots}")
    if knots > steps:
        raise ValidationError(f"knots ({knots}) cannot exceed steps ({steps})")
    rng = make_rng(seed)
    abscissae = np.linspace(0.0, steps - 1, knots)
    ordinates = rng.uniform(-1.0, 1.0, size=knots)
    spline = CubicSpline(abscissae, ordinates, bc_type="natural")
    return Pulse(spline(np.arange(steps, dtype=float)), dt, f"spline(knots={knots},seed={seed})")


def generate_cosine(steps: int, cycles: float, amplitude: float = 1.0, phase: float = 0.0,
                    dt: float = 1.0) -> Pulse:
    steps = _check_steps(steps)
    n = np.arange(steps, dtype=float)
    samples = amplitude * np.cos(2.0 * np.pi * cycles * n / steps + phase)
    return Pulse(samples, dt, f"cosine(cycles={cycles})")


def generate_gaussian_pulse(steps: int, center: float, sigma: float, amplitude: float = 1.0,
                            dt: float = 1.0) -> Pulse:
    steps = _check_steps(steps)
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    n = np.arange(steps, dtype=float)
    samples = amplitude * np.exp(-((n - center) ** 2) / (2.0 * sigma ** 2))
    return Pulse(samples, dt, f"gaussian(sigma={sigma})")


def add_measurement_noise(p: Pulse, sigma: float, seed: int = 0) -> Pulse:
    """Add independent Normal(0, sigma) noise to every sample."""
    if sigma < 0:
        raise ValidationError(f"noise sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return p.with_samples(p.samples)
    rng = make_rng(seed)
    return p.with_samples(p.samples + rng.normal(0.0, sigma, size=len(p)))


def repeat_measurements(pairs: Sequence[TrainingPair], repeats: int, noise_sigma: float,
                        seed: int = 0) -> List[TrainingPair]:
    """Re-measure every pair `repeats` times with fresh noise on the output."""
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    measured = []
    for r in range(repeats):
        for i, pair in enumerate(pairs):
            noisy = add_measurement_noise(pair.output, noise_sigma, seed=seed + r * len(pairs) + i)
            measured.append(TrainingPair(pair.input, noisy, f"{pair.name or i}#{r}"))
    return measured


def spectral_content(p: Pulse, cutoff_fraction: float = 0.25) -> float:
    """Mean Hann-windowed DFT magnitude above `cutoff_fraction * steps`."""
    if not 0.0 <= cutoff_fraction < 0.5:
        raise ValidationError(f"cutoff_fraction must be in [0, 0.5), got {cutoff_fraction}")
    window = get_window("hann", len(p))
    magnitudes = np.abs(np.fft.rfft(p.samples * window))
    cutoff = int(np.ceil(cutoff_fraction * len(p)))
    upper = magnitudes[cutoff:]
    return float(upper.mean()) if upper.size else 0.0


# ==========================================================================
# CSV I/O
# ==========================================================================

def format_pulse(p: Pulse, precision: int = 17) -> str:
    lines = [f"# dt={p.dt!r} label={p.label}"]
    lines.extend(f"{value:.{precision}e}" for value in p.samples)
    return "\n".join(lines) + "\n"


def write_pulse(path: Union[str, Path], p: Pulse, precision: int = 17) -> Path:
    """Write a pulse CSV atomically."""
    return atomic_write_text(path, format_pulse(p, precision))


def read_pulse(path: Union[str, Path]) -> Pulse:
    """Read a pulse CSV.

    Raises:
        ValidationError: If the file is missing, empty or holds non-finite values.
        PulseFormatError: If the header or an amplitude line cannot be parsed.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"Pulse file not found: {path}")
    with open(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise PulseFormatError(f"missing header in {path}", 1)
    match = _HEADER.match(lines[0].strip())
    if match is None:
        raise PulseFormatError(f"expected '# dt=<float> label=<string>' in {path}", 1)
    try:
        dt = float(match.group("dt"))
    except ValueError:
        raise PulseFormatError(f"invalid dt '{match.group('dt')}' in {path}", 1) from None
    label = (match.group("label") or "").strip()

    samples = []
    for line_number, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise PulseFormatError(f"cannot parse amplitude '{text}' in {path}", line_number) from None
        if not np.isfinite(value):
            raise ValidationError(f"line {line_number}: non-finite amplitude in {path}")
        samples.append(value)
    if not samples:
        raise ValidationError(f"empty pulse: {path}")
    return Pulse(np.array(samples), dt, label)


def read_training_set(directory: Union[str, Path]) -> List[TrainingPair]:
    """Read `<name>.in.csv` / `<name>.out.csv` pairs sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"Training directory not found: {directory}")
    inputs = {p.name[:-len(INPUT_SUFFIX)]: p for p in directory.glob(f"*{INPUT_SUFFIX}")}
    outputs = {p.name[:-len(OUTPUT_SUFFIX)]: p for p in directory.glob(f"*{OUTPUT_SUFFIX}")}
    unmatched = sorted(set(inputs) ^ set(outputs))
    if unmatched:
        raise ValidationError(f"unpaired training files in {directory}: {unmatched}")
    if not inputs:
        raise ValidationError(f"no training pairs in {directory}")
    return [TrainingPair(read_pulse(inputs[name]), read_pulse(outputs[name]), name)
            for name in sorted(inputs)]


def write_training_set(directory: Union[str, Path], pairs: Sequence[TrainingPair],
                       names: Optional[Sequence[str]] = None, precision: int = 17) -> List[str]:
    directory = Path(directory)
    if names is None:
        names = [pair.name or f"pair{i:03d}" for i, pair in enumerate(pairs)]
    if len(names) != len(pairs) or len(set(names)) != len(names):
        raise ValidationError("training pair names must be unique, one per pair")
    for name, pair in zip(names, pairs):
        write_pulse(directory / f"{name}{INPUT_SUFFIX}", pair.input, precision)
        write_pulse(directory / f"{name}{OUTPUT_SUFFIX}", pair.output, precision)
    logger.info("wrote %d training pairs to %s", len(pairs), directory)
    return list(names)
