"""Gaussian distortion presets.

Each preset maps a name to the parameters of `volterra.make_gaussian_kernel`.

Preset Format:
    {"R": memory length, "sigma1": linear width, "sigma2": quadratic width,
     "J": quadratic amplitude, "h0": offset}

Distortions A, B and C share R=50 and widen both kernels; D, E and F share
the narrow widths of A and grow the memory length.
"""
from __future__ import annotations

from typing import Any, Dict, Optional

from models import ValidationError, VolterraKernel
from volterra import make_gaussian_kernel


# ==========================================================================
# DEFAULT PRESETS
# ==========================================================================

QUADRATIC_AMPLITUDE = 5e-6
OFFSET = 0.1

DISTORTION_PRESETS: Dict[str, Dict[str, float]] = {
    "A": {"R": 50, "sigma1": 1.0, "sigma2": 4.25},
    "B": {"R": 50, "sigma1": 6.0, "sigma2": 6.37},
    "C": {"R": 50, "sigma1": 11.0, "sigma2": 8.50},
    "D": {"R": 20, "sigma1": 1.0, "sigma2": 4.25},
    "E": {"R": 40, "sigma1": 1.0, "sigma2": 4.25},
    "F": {"R": 60, "sigma1": 1.0, "sigma2": 4.25},
    # near-memoryless kernel for the orthogonalization study
    "small": {"R": 5, "sigma1": 0.1, "sigma2": 0.42},
}
for _params in DISTORTION_PRESETS.values():
    _params.setdefault("J", QUADRATIC_AMPLITUDE)
    _params.setdefault("h0", OFFSET)

NAMED_DISTORTIONS = ("A", "B", "C", "D", "E", "F")

_ALLOWED_KEYS = {"R", "sigma1", "sigma2", "J", "h0", "mu", "mu1", "mu2"}


def get_preset(name: str) -> Dict[str, float]:
    """Copy of the parameters of a named preset.

    Raises:
        ValidationError: If the name is unknown (message lists valid names).
    """
    if name not in DISTORTION_PRESETS:
        valid = ", ".join(DISTORTION_PRESETS)
        raise ValidationError(f"unknown distortion preset '{name}', valid presets: {valid}")
    return dict(DISTORTION_PRESETS[name])


def validate_preset(params: Dict[str, Any]) -> Dict[str, Any]:
    """Check an explicit parameter set and fill in J/h0 defaults."""
    unknown = sorted(set(params) - _ALLOWED_KEYS)
    if unknown:
        raise ValidationError(f"unknown kernel parameters: {unknown}")
    for key in ("R", "sigma1", "sigma2"):
        if key not in params:
            raise ValidationError(f"kernel parameters missing '{key}'")
    params = dict(params)
    params.setdefault("J", QUADRATIC_AMPLITUDE)
    params.setdefault("h0", OFFSET)
    if int(params["R"]) != params["R"] or params["R"] < 1:
        raise ValidationError(f"R must be a positive integer, got {params['R']}")
    params["R"] = int(params["R"])
    if params["sigma1"] <= 0 or params["sigma2"] <= 0:
        raise ValidationError("sigma1 and sigma2 must be positive")
    return params


def make_preset_kernel(name: Optional[str] = None, **overrides: Any) -> VolterraKernel:
    """Kernel for a named preset, an explicit parameter set, or a preset with overrides."""
    params = get_preset(name) if name is not None else {}
    params.update(overrides)
    return make_gaussian_kernel(**validate_preset(params))
