"""Serialization and logging utilities.

This module turns estimate reports and optimization results into
dictionaries for JSON export, records optimizer events, and configures the
standard logging handlers for command-line runs.
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Any, Dict, Optional

from models import EstimateReport, OptimizationResult, PredistortionResult


# ==========================================================================
# EVENT TYPES
# ==========================================================================

class EventType(Enum):
    """Types of optimizer events that can be logged."""
    STARTED = "started"
    ITERATION = "iteration"
    BACKTRACK = "backtrack"
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAILURE = "line_search_failure"


def create_event(event_type: EventType, iteration: int, cost: Optional[float] = None,
                 details: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Create an optimizer event log entry.

    Args:
        event_type: Type of event
        iteration: Accepted-iterate counter when the event occurred
        cost: Objective value at that point (optional)
        details: Additional event-specific details (optional)

    Returns:
        Dictionary ready for JSON serialization
    """
    event: Dict[str, Any] = {
        "event_type": event_type.value,
        "iteration": iteration,
    }
    if cost is not None:
        event["cost"] = float(cost)
    if details is not None:
        event["details"] = details
    return event


# ==========================================================================
# SERIALIZERS
# ==========================================================================

def serialize_report(report: EstimateReport,
                     kernel_errors: Optional[Dict[str, float]] = None) -> Dict[str, Any]:
    """Scalar diagnostics of an estimate (the kernel itself goes to its own file)."""
    data = {
        "method": report.method,
        "R": report.kernel.memory_length,
        "M": report.kernel.coefficient_count,
        "rows": report.rows,
        "rank": report.rank,
        "residual_norm": report.residual_norm,
        "rank_deficient": report.rank_deficient,
        "condition_estimate": report.condition_estimate,
    }
    if kernel_errors is not None:
        data["kernel_mase"] = dict(kernel_errors)
    return data


def serialize_result(result: OptimizationResult) -> Dict[str, Any]:
    return {
        "mode": result.mode,
        "final_cost": result.final_cost,
        "penalty": result.penalty,
        "termination_reason": result.termination_reason.value,
        "iterations": result.iterations,
        "duration_us": result.controls.duration,
        "steps": result.controls.steps,
        "distorted_steps": result.distorted_controls.steps,
        "dt_us": result.controls.dt,
        "cost_trace": list(result.cost_trace),
        "events": list(result.events),
    }


def serialize_predistortion(result: PredistortionResult) -> Dict[str, Any]:
    return {
        "objective": result.objective,
        "converged": result.converged,
        "iterations": result.iterations,
        "steps": len(result.pulse),
    }


# ==========================================================================
# HANDLERS
# ==========================================================================

def configure_logging(verbose: bool = False) -> None:
    """Route library loggers to stderr at INFO (DEBUG when verbose)."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
