"""
Confidence intervals for test-pulse error sweeps.

Provides functions for:
- Normal-approximation confidence interval of a mean test error
- Paired comparisons of two estimators evaluated on the same test pulses
"""
from typing import Any, Dict, Sequence

import numpy as np
from scipy import stats

from models import ValidationError


def mean_confidence_interval(samples: Sequence[float], alpha: float = 0.05) -> Dict[str, float]:
    """
    Mean with a normal-approximation confidence interval.

    Args:
        samples: Per-test-pulse errors
        alpha: 1 - confidence level (0.05 gives the 95% interval)

    Returns:
        Dictionary with 'mean', 'ci_low', 'ci_high', 'std' and 'n'
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValidationError("confidence interval of an empty sample")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    n = samples.size
    mean = float(np.mean(samples))
    std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    z_alpha_half = stats.norm.ppf(1 - alpha / 2)
    half_width = z_alpha_half * std / np.sqrt(n)
    return {
        'mean': mean,
        'ci_low': mean - half_width,
        'ci_high': mean + half_width,
        'std': std,
        'n': n,
    }


def paired_comparison(errors_a: Sequence[float], errors_b: Sequence[float],
                      alpha: float = 0.05) -> Dict[str, Any]:
    """
    Paired comparison of two methods evaluated on identical test pulses.

    Args:
        errors_a: Errors of method A per test pulse
        errors_b: Errors of method B on the same pulses, same order
        alpha: 1 - confidence level

    Returns:
        Dictionary with:
        - 'mean_diff': mean of A - B
        - 'ci_lower', 'ci_upper': normal-approximation interval of the mean difference
        - 't_stat', 'p_value': paired t-test (two-sided)
        - 'n': number of pairs
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    paired_diffs = a - b
    interval = mean_confidence_interval(paired_diffs, alpha)
    n = interval['n']
    se_diff = interval['std'] / np.sqrt(n)
    t_stat = interval['mean'] / se_diff if se_diff > 0 else 0.0
    p_value = 2 * (1 - stats.t.cdf(abs(t_stat), df=n - 1)) if n > 1 and se_diff > 0 else 1.0
    return {
        'mean_diff': interval['mean'],
        'ci_lower': interval['ci_low'],
        'ci_upper': interval['ci_high'],
        't_stat': float(t_stat),
        'p_value': float(p_value),
        'n': n,
    }
