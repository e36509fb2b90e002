"""Separable price optimization under a monotone chain constraint.

After the optimal fees are substituted, the Bill-side profit splits into a
sum of single-price terms ``f_t(p_t)`` over an ordered chain of Bill types,
to be maximized subject to ``p_1 <= p_2 <= ... <= p_n`` and
``0 <= p_t <= p_max``. Each term has the form::

    f_t(p) = own_coef_t * g(own_theta_t, p) - next_coef_t * g(next_theta_t, p)

where ``g`` is the per-user revenue. Two solvers are provided: a Lagrangian
dual method with diminishing subgradient steps (:func:`dual_algorithm`) and a
merge-based repair of non-monotone price vectors (:func:`dynamic_algorithm`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .market import DemandFn, hyperbolic_demand
from .scalar import GRID_POINTS, TOLERANCE, maximize_batch, maximize_scalar

MAX_DUAL_ITERATIONS = 100_000


@dataclass(frozen=True, eq=False)
class SeparableObjective:
    """Sum of single-price terms over a chain of Bill types.

    Attributes:
      own_theta, own_coef: Quality and weight of each term's positive part.
      next_theta, next_coef: Quality and weight of the subtracted successor part.
      price_cap: Upper end of every price interval.
      period: Subscription period passed to the demand model.
      m: Critical type (int) or critical vector (tuple) the terms belong to.
      tail_counts: Number of APOs at or after each chain position.
      labels: Type index (or cell) of each chain position.
      offset: Price-independent Bill-side constant.
    """

    own_theta: np.ndarray
    own_coef: np.ndarray
    next_theta: np.ndarray
    next_coef: np.ndarray
    price_cap: float
    period: float
    m: object
    tail_counts: np.ndarray
    labels: tuple
    offset: float = 0.0
    demand: DemandFn = field(default=hyperbolic_demand, repr=False)

    @property
    def size(self) -> int:
        return int(self.own_coef.size)

    def _g(self, theta, p):
        return p * self.demand(theta, p, self.period)

    def evaluate(self, points: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        """Evaluate term ``rows[i]`` at ``points[i, :]`` (all terms by default)."""
        sl = slice(None) if rows is None else rows
        p = np.asarray(points, dtype=float)
        return (self.own_coef[sl, None] * self._g(self.own_theta[sl, None], p)
                - self.next_coef[sl, None] * self._g(self.next_theta[sl, None], p))

    def term_value(self, t: int, p):
        p = np.asarray(p, dtype=float)
        return (self.own_coef[t] * self._g(self.own_theta[t], p)
                - self.next_coef[t] * self._g(self.next_theta[t], p))

    @property
    def terms(self) -> list:
        """Each term as a single-variable callable."""
        return [partial(self.term_value, t) for t in range(self.size)]

    def values(self, prices) -> np.ndarray:
        prices = np.asarray(prices, dtype=float)
        return self.evaluate(prices[:, None])[:, 0]

    def total(self, prices) -> float:
        """``sum_t f_t(p_t)``, without the offset."""
        return float(self.values(prices).sum())

    def block_value(self, start: int, stop: int, p):
        """``sum_{t=start}^{stop-1} f_t(p)`` (vectorized in ``p``)."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        vals = self.evaluate(np.broadcast_to(p, (stop - start, p.size)),
                             np.arange(start, stop))
        return vals.sum(axis=0)

    def per_price_maximizers(self, tolerance: float = TOLERANCE,
                             grid_points: int = GRID_POINTS) -> np.ndarray:
        """Unconstrained maximizer of each term over ``[0, p_max]``."""
        x, _ = maximize_batch(self.evaluate, self.size, 0.0, self.price_cap,
                              tolerance, grid_points)
        return x


def is_monotone(prices) -> bool:
    return bool(np.all(np.diff(np.asarray(prices, dtype=float)) >= 0))


@dataclass(frozen=True)
class DualResult:
    """Output of :func:`dual_algorithm`.

    ``dual_value`` is the Lagrangian dual ``d(lambda)``; its negation
    ``upper_bound`` bounds ``sum f_t`` over monotone price vectors.
    """

    prices: np.ndarray
    lam: np.ndarray
    dual_value: float
    iterations: int
    converged: bool

    @property
    def upper_bound(self) -> float:
        return -self.dual_value


def _multiplier_coefficients(lam: np.ndarray, n: int) -> np.ndarray:
    # d/dp_t of sum_k lam_k (p_k - p_{k+1}) is lam_t - lam_{t-1}
    c = np.zeros(n)
    c[:-1] += lam
    c[1:] -= lam
    return c


def dual_algorithm(obj: SeparableObjective, init_prices, epsilon: float = 1e-4,
                   max_iterations: int = MAX_DUAL_ITERATIONS,
                   tolerance: float = TOLERANCE,
                   grid_points: int = GRID_POINTS) -> DualResult:
    """Subgradient ascent on the multipliers of ``p_t <= p_{t+1}``.

    Starting from ``lambda = 0`` and the per-price maximizers, each iteration
    raises ``lambda_t`` by ``(p_t - p_{t+1}) / sqrt(t + 1)`` (clipped at 0)
    and re-solves every single-price Lagrangian subproblem. Stops when no
    multiplier moved by more than ``epsilon``; if ``max_iterations`` is hit
    first the last iterate is returned with ``converged=False``.
    """
    n = obj.size
    p = np.array(init_prices, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"expected {n} initial prices")
    grid = np.linspace(0.0, obj.price_cap, grid_points)
    base = obj.evaluate(np.broadcast_to(grid, (n, grid_points)))
    if obj.demand is hyperbolic_demand:
        from ._fastdual import dual_loop
        p, lam, values, t, converged = dual_loop(
            p, np.ascontiguousarray(base), grid, obj.own_coef.astype(float),
            obj.own_theta.astype(float), obj.next_coef.astype(float),
            obj.next_theta.astype(float), float(obj.period), float(tolerance),
            float(epsilon), int(max_iterations))
        return DualResult(prices=p, lam=lam, dual_value=-float(values.sum()),
                          iterations=int(t), converged=bool(converged))
    lam_prev = np.full(n - 1, -1.0)
    lam = np.zeros(n - 1)
    c = np.zeros(n)

    def solve_inner(coef):
        vals = base - coef[:, None] * grid[None, :]
        return maximize_batch(lambda P: obj.evaluate(P) - coef[:, None] * P, n, 0.0,
                              obj.price_cap, tolerance, grid_points, grid_values=vals)

    values = None
    t = 0
    converged = True
    while np.any(np.abs(lam - lam_prev) > epsilon):
        if t >= max_iterations:
            converged = False
            break
        lam_prev = lam
        lam = np.maximum(lam + (p[:-1] - p[1:]) / math.sqrt(t + 1), 0.0)
        c = _multiplier_coefficients(lam, n)
        p, values = solve_inner(c)
        t += 1
    if values is None:
        p, values = solve_inner(c)
    return DualResult(prices=p, lam=lam, dual_value=-float(values.sum()),
                      iterations=t, converged=converged)


@dataclass(frozen=True)
class DynamicResult:
    prices: np.ndarray
    merges: int


def _first_infeasible_run(values: list[float]) -> tuple[int, int] | None:
    """First block run ``i..j`` with ``v_i = ... = v_{j-1} > v_j``."""
    for i in range(len(values) - 1):
        j = i + 1
        while j < len(values) and values[j] == values[i]:
            j += 1
        if j < len(values) and values[j] < values[i]:
            return i, j
    return None


def dynamic_algorithm(obj: SeparableObjective, prices, tolerance: float = TOLERANCE,
                      grid_points: int = GRID_POINTS) -> DynamicResult:
    """Repair a non-monotone price vector by merging violating runs.

    The first (and shortest) run of blocks ``p_i >= ... >= p_j`` with
    ``p_i > p_j`` is pooled at the maximizer of the summed terms, and the
    scan restarts. Pooled blocks are never split again, so at most ``n - 1``
    merges occur. Monotone input is returned unchanged.
    """
    prices = np.array(prices, dtype=float)
    if prices.shape != (obj.size,):
        raise ValueError(f"expected {obj.size} prices")
    starts = list(range(obj.size))
    values = list(prices)
    merges = 0
    while (run := _first_infeasible_run(values)) is not None:
        i, j = run
        lo, hi = starts[i], starts[j + 1] if j + 1 < len(starts) else obj.size
        x, _ = maximize_scalar(partial(obj.block_value, lo, hi), 0.0, obj.price_cap,
                               tolerance, grid_points)
        starts[i:j + 1] = [lo]
        values[i:j + 1] = [x]
        merges += 1
    ends = starts[1:] + [obj.size]
    out = np.concatenate([np.full(e - s, v) for s, e, v in zip(starts, ends, values)])
    return DynamicResult(prices=out, merges=merges)


def optimize_chain(obj: SeparableObjective, epsilon: float = 1e-4,
                   max_iterations: int = MAX_DUAL_ITERATIONS,
                   tolerance: float = TOLERANCE, grid_points: int = GRID_POINTS):
    """Per-price maximizers, then dual, then dynamic repair when needed.

    Returns ``(prices, dual_result, lower_bound, merges, stage)`` where
    ``lower_bound`` is ``sum f_t`` at the returned monotone prices and
    ``stage`` names the step that produced them.
    """
    p_dagger = obj.per_price_maximizers(tolerance, grid_points)
    dual = dual_algorithm(obj, p_dagger, epsilon, max_iterations, tolerance, grid_points)
    if is_monotone(p_dagger):
        prices, merges, stage = p_dagger, 0, "per-price"
    elif is_monotone(dual.prices):
        prices, merges, stage = dual.prices, 0, "dual"
    else:
        dyn = dynamic_algorithm(obj, dual.prices, tolerance, grid_points)
        prices, merges, stage = dyn.prices, dyn.merges, "dynamic"
    return prices, dual, obj.total(prices), merges, stage
