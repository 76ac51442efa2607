"""Parallel sweep runner and convenience entry points."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from dotenv import load_dotenv

from models import ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")

THREADS_ENV = "VOLTERRA_THREADS"


def thread_count() -> int:
    """Sweep parallelism from VOLTERRA_THREADS (a .env file is honoured).

    Defaults to min(4, cpu count).
    """
    load_dotenv()
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, min(4, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got '{raw}'") from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def run_sweep(fn: Callable[[T], U], items: Iterable[T],
              max_workers: Optional[int] = None) -> List[U]:
    """Evaluate `fn` on every item, in parallel, keeping input order.

    Args:
        fn: Pure function of one sweep point
        items: Sweep points
        max_workers: Worker cap (default: thread_count())

    Returns:
        Results in the order of `items`
    """
    items = list(items)
    workers = max_workers or thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("running %d sweep points on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
