"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .exceptions import LengthMismatch, OutOfRange
from .tasks import TaskSpec, get_task


def check_tasks(X) -> list[TaskSpec]:
    """Coerce ``X`` to a list of TaskSpecs.

    Accepts TaskSpecs, Roman-numeral ids, or an ``(n, 1)`` array of either,
    which is what sklearn utilities such as ``cross_val_score`` pass around.
    """
    if isinstance(X, (str, TaskSpec)):
        raise ValueError("X must be a sequence of tasks, not a single task")
    arr = np.asarray(X, dtype=object)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"X must have a single column of task ids, got shape {arr.shape}")
        arr = arr[:, 0]
    elif arr.ndim != 1:
        raise ValueError(f"X must be 1-d or a single column, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("X is empty")
    return [get_task(x) for x in arr]


def check_judgments(y, n_expected: int | None = None) -> np.ndarray:
    """Finite judgments on the 0-100 scale as a float array."""
    y = np.asarray(y, dtype=float).ravel()
    if n_expected is not None and y.size != n_expected:
        raise LengthMismatch(f"expected {n_expected} judgments, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("judgments must be finite")
    if np.any((y < 0) | (y > 100)):
        raise OutOfRange("judgments must lie in [0, 100]")
    return y
