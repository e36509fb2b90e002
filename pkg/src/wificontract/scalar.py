"""Grid-then-golden maximization of single-variable functions.

The functions met by the price optimizer are smooth but not guaranteed
unimodal, so a uniform grid scan locates the best cell first and a golden
section search then polishes inside the two grid intervals around it. The
batched variant runs many independent problems in lockstep with numpy.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

GRID_POINTS = 1024
TOLERANCE = 1e-8
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

BatchFn = Callable[[np.ndarray], np.ndarray]


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError("objective returned a non-finite value")


def maximize_batch(func: BatchFn, n: int, lo: float, hi: float,
                   tolerance: float = TOLERANCE, grid_points: int = GRID_POINTS,
                   grid_values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Maximize ``n`` scalar functions over the common interval ``[lo, hi]``.

    Args:
      func: Maps an ``(n, r)`` array of points to the ``(n, r)`` values, row
        ``i`` evaluating function ``i``.
      n: Number of functions.
      lo, hi: Search interval, ``lo <= hi``.
      tolerance: Final golden-section bracket width.
      grid_points: Size of the uniform scan grid (endpoints included).
      grid_values: Optional precomputed ``func`` values on the grid.

    Returns:
      ``(argmax, max)`` arrays of length ``n``. Ties resolve toward the
      smallest point, and the result is never worse than the best grid value.
    """
    if lo > hi:
        raise ValueError("need lo <= hi")
    rows = np.arange(n)
    if lo == hi:
        x = np.full(n, float(lo))
        v = func(x[:, None])[:, 0]
        _check_finite(v)
        return x, v
    grid = np.linspace(lo, hi, grid_points)
    if grid_values is None:
        grid_values = func(np.broadcast_to(grid, (n, grid_points)))
    _check_finite(grid_values)
    idx = np.argmax(grid_values, axis=1)
    best_x = grid[idx]
    best_v = grid_values[rows, idx]

    a = grid[np.maximum(idx - 1, 0)]
    b = grid[np.minimum(idx + 1, grid_points - 1)]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = func(c[:, None])[:, 0]
    fd = func(d[:, None])[:, 0]
    while np.max(b - a) > tolerance:
        left = fc >= fd  # keep the lower bracket on ties
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INV_PHI * (b - a)
        new_d = a + _INV_PHI * (b - a)
        probe = np.where(left, new_c, new_d)
        fp = func(probe[:, None])[:, 0]
        c, d, fc, fd = (np.where(left, new_c, d), np.where(left, c, new_d),
                        np.where(left, fp, fd), np.where(left, fc, fp))
    _check_finite(fc)
    _check_finite(fd)
    take_d = fd > fc
    gx = np.where(take_d, d, c)
    gv = np.where(take_d, fd, fc)
    better = gv > best_v
    return np.where(better, gx, best_x), np.where(better, gv, best_v)


def maximize_scalar(f: Callable, lo: float, hi: float, tolerance: float = TOLERANCE,
                    grid_points: int = GRID_POINTS) -> tuple[float, float]:
    """Maximize ``f`` on ``[lo, hi]``; returns ``(argmax, max)``.

    ``f`` may be vectorized; otherwise it is called point by point.

    >>> x, v = maximize_scalar(lambda p: -(p - 1.0) ** 2, 0.0, 2.0)
    >>> abs(x - 1.0) < 1e-8
    True
    """
    vectorized = []  # decided on the first (grid) call

    def batched(points: np.ndarray) -> np.ndarray:
        flat = points.reshape(-1)
        if not vectorized:
            try:
                out = np.asarray(f(flat), dtype=float)
                vectorized.append(out.shape == flat.shape)
            except (TypeError, ValueError):
                vectorized.append(False)
            if vectorized[0]:
                return out.reshape(points.shape)
        if vectorized[0]:
            return np.asarray(f(flat), dtype=float).reshape(points.shape)
        return np.array([float(f(float(x))) for x in flat]).reshape(points.shape)

    x, v = maximize_batch(batched, 1, float(lo), float(hi), tolerance, grid_points)
    return float(x[0]), float(v[0])
