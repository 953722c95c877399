"""Sliding-window machinery shared by the maximal operators.

Window = axis-aligned block of `l` consecutive cells per axis, fully inside
the grid.  The recurring primitive is "max over all windows of length l that
contain cell x", computed from per-start window statistics with the two-pass
block trick (running max within blocks of size l from both ends), which is
O(n) per length instead of O(n*l).
"""
from __future__ import annotations

import numpy as np

__all__ = ["window_starts_max", "containing_max", "containing_max_2d", "window_means"]


def window_starts_max(values: np.ndarray, w: int) -> np.ndarray:
    """Max over values[i:i+w] for each start i along the last axis."""
    if w == 1:
        return values.copy()
    m = values.shape[-1]
    if w > m:
        raise ValueError("window longer than array")
    nblocks = -(-m // w)
    pad = nblocks * w - m
    if pad:
        shape = values.shape[:-1] + (pad,)
        v = np.concatenate([values, np.full(shape, -np.inf)], axis=-1)
    else:
        v = values
    blocks = v.reshape(v.shape[:-1] + (nblocks, w))
    left = np.maximum.accumulate(blocks, axis=-1).reshape(v.shape)
    right = np.maximum.accumulate(blocks[..., ::-1], axis=-1)[..., ::-1].reshape(v.shape)
    starts = np.arange(m - w + 1)
    return np.maximum(right[..., starts], left[..., starts + w - 1])


def containing_max(per_start: np.ndarray, l: int, n: int) -> np.ndarray:
    """Given a statistic per window start (length n-l+1 on the last axis),
    return per cell x the max over windows of length l containing x."""
    if per_start.shape[-1] != n - l + 1:
        raise ValueError("per_start must have n-l+1 entries")
    if l == 1:
        return per_start.copy()
    shape = per_start.shape[:-1] + (n + l - 1,)
    padded = np.full(shape, -np.inf)
    padded[..., l - 1 : n] = per_start
    return window_starts_max(padded, l)


def containing_max_2d(per_start: np.ndarray, l: int, n: int) -> np.ndarray:
    """2D version: per_start has shape (n-l+1, n-l+1), output (n, n)."""
    rows = containing_max(per_start, l, n)          # axis 1
    return containing_max(rows.T, l, n).T           # axis 0


def window_means(values: np.ndarray, l: int) -> np.ndarray:
    """Mean over each length-l window (1D) or l-by-l window (2D), per start."""
    if values.ndim == 1:
        c = np.concatenate([[0.0], np.cumsum(values)])
        return (c[l:] - c[:-l]) / l
    c = np.zeros((values.shape[0] + 1, values.shape[1] + 1))
    np.cumsum(np.cumsum(values, axis=0), axis=1, out=c[1:, 1:])
    s = c[l:, l:] - c[:-l, l:] - c[l:, :-l] + c[:-l, :-l]
    return s / (l * l)
