"""Human-readable summaries of estimates, optimizations and sweeps."""
from typing import Dict, Optional

import pandas as pd

from models import EstimateReport, OptimizationResult, PredistortionResult


def format_estimate_report(report: EstimateReport,
                           kernel_errors: Optional[Dict[str, float]] = None) -> str:
    """Format an estimate report in a readable, organized way."""
    kernel = report.kernel
    lines = []
    lines.append("=" * 70)
    lines.append("VOLTERRA KERNEL ESTIMATE")
    lines.append("=" * 70)

    lines.append("\nPROBLEM")
    lines.append("-" * 70)
    lines.append(f"  Method: {report.method}")
    lines.append(f"  Memory length R: {kernel.memory_length}")
    lines.append(f"  Coefficients M: {kernel.coefficient_count}")
    lines.append(f"  Rows: {report.rows}")

    lines.append("\nSOLVER DIAGNOSTICS")
    lines.append("-" * 70)
    lines.append(f"  Residual norm: {report.residual_norm:.6e}")
    lines.append(f"  Condition estimate: {report.condition_estimate:.3e}")
    rank = f" (rank {report.rank})" if report.rank is not None else ""
    lines.append(f"  Rank deficient: {'yes' if report.rank_deficient else 'no'}{rank}")

    lines.append("\nKERNEL")
    lines.append("-" * 70)
    lines.append(f"  h0: {kernel.h0:.6e}")
    lines.append(f"  max |h1|: {abs(kernel.h1).max():.6e}")
    lines.append(f"  max |h2|: {abs(kernel.h2).max():.6e}")

    if kernel_errors:
        lines.append("\nERROR VS REFERENCE KERNEL (MASE)")
        lines.append("-" * 70)
        for order, value in kernel_errors.items():
            lines.append(f"  {order}: {value:.3e}")

    lines.append("=" * 70)
    return "\n".join(lines)


def format_optimization_result(result: OptimizationResult) -> str:
    """Format an excitation optimization result."""
    lines = []
    lines.append("=" * 70)
    lines.append("EXCITATION OPTIMIZATION")
    lines.append("=" * 70)
    lines.append(f"  Mode: {result.mode}")
    lines.append(f"  Duration: {result.controls.duration:.4f} us "
                 f"({result.controls.steps} steps of {result.controls.dt * 1e3:.3f} ns)")
    if result.distorted_controls.steps != result.controls.steps:
        lines.append(f"  Distorted horizon: {result.distorted_controls.duration:.4f} us")
    lines.append(f"  Iterations: {result.iterations} ({result.termination_reason.value})")
    lines.append(f"  Initial objective: {result.cost_trace[0]:.6e}")
    lines.append(f"  Excitation error: {result.final_cost:.6e}")
    lines.append(f"  Rise-speed penalty: {result.penalty:.3e}")
    lines.append("=" * 70)
    return "\n".join(lines)


def format_predistortion(result: PredistortionResult) -> str:
    lines = ["=" * 70, "PRE-DISTORTION", "=" * 70]
    lines.append(f"  Input samples: {len(result.pulse)}")
    lines.append(f"  Smoothed l1 objective: {result.objective:.6e}")
    lines.append(f"  Converged: {'yes' if result.converged else 'no (best iterate)'}")
    lines.append("=" * 70)
    return "\n".join(lines)


def format_panel(name: str, table: pd.DataFrame, max_rows: int = 12) -> str:
    """Short preview of a figure panel table."""
    lines = [f"\n{name} ({len(table)} rows)", "-" * 70]
    lines.append(table.head(max_rows).to_string(index=False))
    return "\n".join(lines)


def print_estimate_report(report: EstimateReport,
                          kernel_errors: Optional[Dict[str, float]] = None):
    print(format_estimate_report(report, kernel_errors))
