"""Compiled dual loop for the default hyperbolic demand.

Mirrors :func:`wificontract.pricing.dual_algorithm` together with the grid
scan and golden refinement of :func:`wificontract.scalar.maximize_batch`,
step for step, so both paths agree to rounding. Used automatically when the
objective uses the shipped demand model.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True)
def _term(p, a, ta, b, tb, T, c):
    ga = p * (T / (1.0 + p / ta))
    gb = p * (T / (1.0 + p / tb))
    return a * ga - b * gb - c * p


@njit(cache=True)
def _inner(base, grid, coef, a, ta, b, tb, T, tol, x_out, v_out):
    n, R = base.shape
    for r in range(n):
        c = coef[r]
        best = 0
        best_v = base[r, 0] - c * grid[0]
        for i in range(1, R):
            v = base[r, i] - c * grid[i]
            if v > best_v:
                best_v = v
                best = i
        lo = grid[best - 1] if best > 0 else grid[0]
        hi = grid[best + 1] if best < R - 1 else grid[R - 1]
        xc = hi - _INV_PHI * (hi - lo)
        xd = lo + _INV_PHI * (hi - lo)
        fc = _term(xc, a[r], ta[r], b[r], tb[r], T, c)
        fd = _term(xd, a[r], ta[r], b[r], tb[r], T, c)
        while hi - lo > tol:
            if fc >= fd:
                hi = xd
                xd = xc
                fd = fc
                xc = hi - _INV_PHI * (hi - lo)
                fc = _term(xc, a[r], ta[r], b[r], tb[r], T, c)
            else:
                lo = xc
                xc = xd
                fc = fd
                xd = lo + _INV_PHI * (hi - lo)
                fd = _term(xd, a[r], ta[r], b[r], tb[r], T, c)
        if fd > fc:
            gx, gv = xd, fd
        else:
            gx, gv = xc, fc
        if gv > best_v:
            x_out[r] = gx
            v_out[r] = gv
        else:
            x_out[r] = grid[best]
            v_out[r] = best_v


@njit(cache=True)
def dual_loop(p, base, grid, a, ta, b, tb, T, tol, epsilon, max_iter):
    """Run the subgradient loop; returns (prices, lam, values, iterations, converged)."""
    n = p.shape[0]
    lam = np.zeros(n - 1)
    lam_prev = np.full(n - 1, -1.0)
    coef = np.zeros(n)
    values = np.zeros(n)
    t = 0
    converged = True
    solved = False
    while True:
        moved = False
        for k in range(n - 1):
            if abs(lam[k] - lam_prev[k]) > epsilon:
                moved = True
                break
        if not moved:
            break
        if t >= max_iter:
            converged = False
            break
        step = 1.0 / math.sqrt(t + 1.0)
        for k in range(n - 1):
            lam_prev[k] = lam[k]
            lam[k] = max(lam[k] + (p[k] - p[k + 1]) * step, 0.0)
        for k in range(n):
            coef[k] = 0.0
        for k in range(n - 1):
            coef[k] += lam[k]
            coef[k + 1] -= lam[k]
        _inner(base, grid, coef, a, ta, b, tb, T, tol, p, values)
        solved = True
        t += 1
    if not solved:
        _inner(base, grid, coef, a, ta, b, tb, T, tol, p, values)
    return p, lam, values, t, converged
