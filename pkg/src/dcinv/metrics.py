"""Model-comparison metrics used by the ablation harness and tests."""

from __future__ import annotations

import numpy as np


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    da = a - a.mean()
    db = b - b.mean()
    denom = np.linalg.norm(da) * np.linalg.norm(db)
    if denom == 0:
        return float("nan")
    return float(da @ db / denom)


def mean_abs_gradient(grid: np.ndarray) -> float:
    """Mean |difference| over all adjacent cell pairs, both axes pooled."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise ValueError("expected a 2D grid")
    diffs = []
    if grid.shape[0] > 1:
        diffs.append(np.abs(np.diff(grid, axis=0)).ravel())
    if grid.shape[1] > 1:
        diffs.append(np.abs(np.diff(grid, axis=1)).ravel())
    if not diffs:
        return 0.0
    return float(np.concatenate(diffs).mean())
