"""Brute-force ground truth for small instances.

:func:`grid_search_contract` and :func:`hetero_grid_search` enumerate every
critical type (vector) and every chain-monotone price tuple on a uniform grid,
price each tuple with the closed-form optimal fees, and keep the best exact
profit. The profit of all tuples is computed in one vectorized pass that
re-derives fees and profit from the model definitions, and the winner is then
re-priced through the scalar library path.

:func:`best_response_check` verifies the Nash property directly: every type's
designed item must be among its payoff-maximizing choices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hetero_market import (
    HeteroContract,
    HeteroPopulation,
    hetero_cross_payoff,
    hetero_operator_profit,
    hetero_stats,
)
from .market import LINUS, Contract, Population, cross_payoff, market_stats, operator_profit

MAX_GRID_TYPES = 4
# same tie rule as the solvers
PROFIT_TIE = 1e-9
MAX_GRID_CELLS = 6


@dataclass(frozen=True)
class GridSpec:
    """Uniform price grid ``{i p_max / (G - 1)}`` including both bounds."""

    points: int = 101
    includes_bounds: bool = True

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("a price grid needs at least 2 points")
        if not self.includes_bounds:
            raise ValueError("price grids always include both bounds")

    def values(self, price_cap: float) -> np.ndarray:
        return np.linspace(0.0, price_cap, self.points)


@dataclass(frozen=True)
class OracleResult:
    """Best contract found by enumeration; unpacks as ``(contract, profit)``."""

    contract: Contract | HeteroContract
    profit: float
    trace: tuple = field(default=())

    def __iter__(self):
        return iter((self.contract, self.profit))


def nondecreasing_tuples(n_values: int, length: int) -> np.ndarray:
    """All nondecreasing index tuples of ``length`` over ``range(n_values)``.

    Rows are in lexicographic order.
    """
    if length == 0:
        return np.zeros((1, 0), dtype=np.int32)
    rows = np.arange(n_values, dtype=np.int32)[:, None]
    for _ in range(length - 1):
        last = rows[:, -1]
        counts = n_values - last
        starts = np.cumsum(counts) - counts
        offsets = np.arange(counts.sum()) - np.repeat(starts, counts)
        rows = np.column_stack([np.repeat(rows, counts, axis=0),
                                np.repeat(last, counts) + offsets]).astype(np.int32)
    return rows


def grid_search_contract(pop: Population, grid: GridSpec = GridSpec()) -> OracleResult:
    """Best grid contract over all critical types, with ``p0 = p_max``.

    Profits within ``PROFIT_TIE`` across critical types go to the smaller
    type; within a type ties go to the
    lexicographically smaller price tuple. ``trace`` lists the best profit
    found for every critical type, all-Linus included.
    """
    K = pop.n_types
    if K > MAX_GRID_TYPES:
        raise ValueError(f"grid search is limited to K <= {MAX_GRID_TYPES}")
    values = grid.values(pop.price_cap)
    p0 = pop.price_cap
    w, a = pop.roam_weight, pop.alien_ratio
    best = None
    trace = []
    for m in range(1, K + 2):
        bill = slice(m - 1, K)
        n_bill = pop.counts[bill].sum()
        linus_spend = float(np.dot(pop.counts[: m - 1], pop.g(pop.qualities[: m - 1], p0)))
        linus_rev = (w * n_bill + a) * linus_spend
        if m == K + 1:
            trace.append((m, linus_rev))
            if best is None or linus_rev > best[0] + PROFIT_TIE:
                best = (linus_rev, m, np.zeros(0))
            continue
        P = values[nondecreasing_tuples(grid.points, K - m + 1)]
        theta = pop.qualities[bill]
        counts = pop.counts[bill]
        own = pop.g(theta[None, :], P)
        omega = w * (n_bill - 1.0) + a
        nu = w * (own @ counts + linus_spend)
        first = omega * own[:, 0] - (nu - w * own[:, 0])
        steps = omega * (own[:, 1:] - pop.g(theta[None, 1:], P[:, :-1]))
        fees = first[:, None] + np.concatenate(
            [np.zeros((P.shape[0], 1)), np.cumsum(steps, axis=1)], axis=1)
        profit = linus_rev + fees @ counts
        collapsed = np.any((P == 0.0) & (np.abs(fees) <= PROFIT_TIE), axis=1)
        profit[collapsed] = -np.inf
        i = int(np.argmax(profit))
        trace.append((m, float(profit[i])))
        if best is None or profit[i] > best[0] + PROFIT_TIE:
            best = (float(profit[i]), m, P[i])
    from .solver import optimal_fees
    _, m, prices = best
    c = Contract.threshold(K, m, prices, optimal_fees(pop, m, prices, p0), p0)
    return OracleResult(c, operator_profit(pop, c), tuple(trace))


def critical_vectors(n_types: int, n_levels: int, cap: int | None = None) -> list[tuple[int, ...]]:
    """All nonincreasing vectors in ``{1..K+1}^L``, in lexicographic order."""
    from math import comb
    count = comb(n_types + n_levels, n_levels)
    if cap is not None and count > cap:
        raise ValueError(f"{count} critical vectors exceed the cap of {cap}; "
                         "use fewer quality or mobility levels")
    idx = nondecreasing_tuples(n_types + 1, n_levels)
    vecs = (n_types + 1 - idx)  # nondecreasing indices -> nonincreasing values
    return sorted(tuple(int(v) for v in row) for row in vecs)


def chain_cells(m: tuple[int, ...], n_types: int) -> list[tuple[int, int]]:
    """Bill cells of critical vector ``m`` sorted by quality, then mobility."""
    return [(k, l) for k in range(n_types) for l in range(len(m)) if k + 1 >= m[l]]


def _hetero_chain_profits(pop: HeteroPopulation, m, cells, P: np.ndarray,
                          p0: float) -> np.ndarray:
    """Exact profit of each chain price row of ``P`` under the optimal fees."""
    K, L = pop.counts.shape
    w = pop.roam_weights
    bill = np.zeros((K, L), dtype=bool)
    for k, l in cells:
        bill[k, l] = True
    mu = float((pop.counts * bill * w[None, :]).sum()) + pop.alien_ratio
    omega = mu - w
    linus_spend = float((pop.counts * pop.g(pop.qualities[:, None], p0))[~bill].sum())
    ks = np.array([k for k, _ in cells])
    ls = np.array([l for _, l in cells])
    n = pop.counts[ks, ls]
    own = pop.g(pop.qualities[ks][None, :], P)
    nu = own @ n + linus_spend
    fees = np.empty_like(P)
    k0, l0 = cells[0]
    fees[:, 0] = mu * own[:, 0] - w[l0] * nu
    for t in range(1, len(cells)):
        k, l = cells[t]
        step = own[:, t] - pop.g(pop.qualities[k], P[:, t - 1])
        fees[:, t] = fees[:, t - 1] + omega[l] * step
    profit = mu * linus_spend + fees @ n
    collapsed = np.any((P == 0.0) & (np.abs(fees) <= PROFIT_TIE), axis=1)
    profit[collapsed] = -np.inf
    return profit


def hetero_grid_search(pop: HeteroPopulation, grid: GridSpec = GridSpec(21)) -> OracleResult:
    """Best feasible grid contract over all monotone critical vectors.

    Candidates are visited in decreasing profit order until one passes the
    structural feasibility check, so the result is always feasible.
    """
    from .feasibility import check_theorem2_hetero
    from .hetero_solver import hetero_optimal_fees

    K, L = pop.counts.shape
    if K * L > MAX_GRID_CELLS:
        raise ValueError(f"hetero grid search is limited to K*L <= {MAX_GRID_CELLS}")
    values = grid.values(pop.price_cap)
    p0 = pop.price_cap
    best = None
    trace = []
    for m in critical_vectors(K, L):
        cells = chain_cells(m, K)
        if not cells:
            c = HeteroContract.from_arrays(np.zeros((K, L)), np.zeros((K, L)), p0,
                                           np.zeros((K, L), dtype=bool))
            found = (hetero_operator_profit(pop, c), c)
        else:
            P = values[nondecreasing_tuples(grid.points, len(cells))]
            profit = _hetero_chain_profits(pop, m, cells, P, p0)
            found = None
            for i in np.argsort(-profit, kind="stable"):
                if not np.isfinite(profit[i]):
                    break
                prices = np.zeros((K, L))
                for (k, l), x in zip(cells, P[i]):
                    prices[k, l] = x
                fees = hetero_optimal_fees(pop, m, prices, p0)
                mask = np.zeros((K, L), dtype=bool)
                for k, l in cells:
                    mask[k, l] = True
                c = HeteroContract.from_arrays(prices, fees, p0, mask)
                if check_theorem2_hetero(pop, c).is_feasible and c.critical_types == m:
                    found = (hetero_operator_profit(pop, c), c)
                    break
        trace.append((m, found[0] if found else float("nan")))
        if found and (best is None or found[0] > best[0] + PROFIT_TIE):
            best = found
    return OracleResult(best[1], best[0], tuple(trace))


@dataclass(frozen=True)
class BestResponseVerdict:
    """``ok`` is true iff every type's designed item is a best response."""

    ok: bool
    deviations: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def best_response_check(pop, c, tolerance: float = 1e-9) -> BestResponseVerdict:
    """Check that each type weakly prefers its designed item.

    Every type compares all Bill items and the Linus item (payoff 0). The
    verdict lists ``(type, best_target, shortfall)`` for types whose designed
    item falls short of the best alternative by more than ``tolerance``.
    """
    if isinstance(pop, HeteroPopulation):
        stats = hetero_stats(pop, c)
        K, L = c.shape
        types = [(k, l) for k in range(K) for l in range(L)]
        item_of = lambda t: c.items[t[0]][t[1]]
        targets = [None] + c.bill_cells()
        pay = lambda t, it: hetero_cross_payoff(pop, c, stats, t, it)
    else:
        stats = market_stats(pop, c)
        types = list(range(pop.n_types))
        item_of = lambda t: c.items[t]
        targets = [None] + [int(k) for k in c.bill_types]
        pay = lambda t, it: cross_payoff(pop, c, stats, t, it)
    bad = []
    for t in types:
        options = [(tgt, pay(t, LINUS if tgt is None else item_of(tgt))) for tgt in targets]
        designed = pay(t, item_of(t)) if not item_of(t).is_linus else 0.0
        tgt, best = max(options, key=lambda o: o[1])
        if designed < best - tolerance:
            bad.append((t, tgt, best - designed))
    return BestResponseVerdict(not bad, tuple(bad))
