"""Maximum-weight perfect assignment on a square matrix."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["max_weight_assignment"]


def max_weight_assignment(weights) -> tuple[np.ndarray, float]:
    """Permutation ``perm`` maximizing sum_i W[i, perm[i]] and that total.

    Solved with scipy's shortest-augmenting-path Hungarian variant, O(m^3).
    """
    w = np.asarray(weights, dtype=float)
    if w.shape == (0,):
        w = w.reshape(0, 0)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weights must be a square matrix, got shape {w.shape}")
    if w.size == 0:
        return np.zeros(0, dtype=np.intp), 0.0
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    rows, cols = linear_sum_assignment(w, maximize=True)
    perm = np.empty(w.shape[0], dtype=np.intp)
    perm[rows] = cols
    return perm, float(w[rows, cols].sum())
