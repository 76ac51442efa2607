"""Utility functions for random number generation and file output."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import List, Union

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator.

    Args:
        seed: Non-negative integer seed

    Returns:
        NumPy random number generator whose draws depend only on the seed
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def child_seeds(seed: int, count: int) -> List[int]:
    """Independent integer seeds for the points of a sweep.

    Args:
        seed: Global seed
        count: Number of seeds needed

    Returns:
        List of `count` seeds, identical for identical (seed, count)
    """
    sequence = np.random.SeedSequence(int(seed))
    return [int(child.generate_state(1)[0]) for child in sequence.spawn(count)]


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write text to `path` via a temporary file and rename.

    A failure while writing leaves any existing file untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path
