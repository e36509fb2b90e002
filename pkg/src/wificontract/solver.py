"""Optimal contract for homogeneous mobility.

For a fixed critical type ``m`` the optimal fees are closed-form in the
prices (:func:`optimal_fees`): the IR constraint of type ``m`` and every
adjacent downward IC constraint bind. Substituting them leaves a separable
price problem over the Bill types ``m..K`` with nondecreasing prices, solved
by :mod:`wificontract.pricing`. :func:`solve` searches all ``K + 1``
critical types and keeps the one with the largest exact profit.

The separable terms come in two flavours. ``include_coupling=False`` gives
the textbook per-type terms, which leave out the part of the type-``m`` fee
that depends on every other Bill's price through the shared payment base
``nu``. ``include_coupling=True`` (the solver default) folds that part back
in; it is still separable because it is a weighted sum of single-price
revenues, so the decomposed objective then equals the exact profit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .feasibility import check_theorem1
from .market import Contract, Population, market_stats, operator_profit, payoffs
from .pricing import (
    MAX_DUAL_ITERATIONS,
    SeparableObjective,
    optimize_chain,
)
from .scalar import GRID_POINTS, TOLERANCE

# profits closer than this are ties, resolved toward the smaller critical type
PROFIT_TIE = 1e-9


class InfeasiblePricesError(ValueError):
    """Raised when prices are outside ``[0, p_max]`` or not nondecreasing."""


def _bill_prices(pop: Population, m: int, prices) -> np.ndarray:
    K = pop.n_types
    prices = np.asarray(prices, dtype=float).reshape(-1)
    n_bill = K - m + 1
    if prices.size == K:
        prices = prices[m - 1:]
    elif prices.size != n_bill:
        raise ValueError(f"expected {n_bill} Bill prices or {K} prices")
    if np.any(prices < 0) or np.any(prices > pop.price_cap) or np.any(np.diff(prices) < 0):
        raise InfeasiblePricesError("Bill prices must be nondecreasing within [0, p_max]")
    return prices


def _check_m(pop: Population, m: int) -> None:
    if not 1 <= m <= pop.n_types + 1:
        raise ValueError(f"critical type must lie in 1..{pop.n_types + 1}, got {m}")


def optimal_fees(pop: Population, m: int, prices, p0: float) -> np.ndarray:
    """Revenue-maximizing fees for Bill types ``m..K`` at the given prices.

    The first Bill's IR binds, ``delta_m = omega g_m(p_m) - beta_m``, and each
    later fee adds ``omega (g_k(p_k) - g_k(p_{k-1}))``.

    Args:
      pop: Population.
      m: Critical type (1-based).
      prices: Either the ``K - m + 1`` Bill prices or a full length-``K``
        vector whose Linus entries are ignored.
      p0: Linus-AP price.

    Returns:
      Fees of the Bill types, in type order (empty when ``m = K + 1``).
    """
    _check_m(pop, m)
    if m == pop.n_types + 1:
        return np.zeros(0)
    p = _bill_prices(pop, m, prices)
    bill = slice(m - 1, None)
    theta = pop.qualities[bill]
    n_bill = pop.counts[bill].sum()
    w = pop.roam_weight
    omega = w * (n_bill - 1.0) + pop.alien_ratio
    own = pop.g(theta, p)
    nu = w * (float(np.dot(pop.counts[bill], own))
              + float(np.dot(pop.counts[: m - 1], pop.g(pop.qualities[: m - 1], p0))))
    beta_m = nu - w * own[0]
    steps = omega * (own[1:] - pop.g(theta[1:], p[:-1]))
    return omega * own[0] - beta_m + np.concatenate([[0.0], np.cumsum(steps)])


def build_objective(pop: Population, m: int, p0: float,
                    include_coupling: bool = False) -> SeparableObjective:
    """Separable price objective for critical type ``m``.

    Term ``k`` (for Bill types ``m..K``, with ``s_k`` the tail counts):

    * first Bill: ``((1-eta)/N + omega) s_m g_m(p) - omega s_{m+1} g_{m+1}(p)``;
    * later Bills: ``omega s_k g_k(p) - omega s_{k+1} g_{k+1}(p)``, where
      ``s_{K+1} = 0`` so the last term is ``omega N_K g_K(p)``.

    When ``m = K`` the first-Bill form is used. With ``include_coupling``
    each term additionally loses ``(1-eta)/N s_m N_k g_k(p)`` and the Linus
    part of the shared payment base becomes the constant ``offset``.
    """
    K = pop.n_types
    _check_m(pop, m)
    if m == K + 1:
        raise ValueError("no Bill types when m = K + 1")
    k = np.arange(m - 1, K)
    s = pop.tail_counts()
    s_next = np.append(s[1:], 0.0)[k]
    w = pop.roam_weight
    n_bill = s[m - 1]
    omega = w * (n_bill - 1.0) + pop.alien_ratio
    own_coef = omega * s[k]
    own_coef[0] += w * s[m - 1]
    next_coef = omega * s_next
    next_theta = pop.qualities[np.minimum(k + 1, K - 1)]
    offset = 0.0
    if include_coupling:
        own_coef -= w * n_bill * pop.counts[k]
        linus = slice(0, m - 1)
        offset = -w * n_bill * float(np.dot(pop.counts[linus], pop.g(pop.qualities[linus], p0)))
    return SeparableObjective(
        own_theta=pop.qualities[k].copy(), own_coef=own_coef, next_theta=next_theta,
        next_coef=next_coef, price_cap=pop.price_cap, period=pop.period, m=m,
        tail_counts=s[k].copy(), labels=tuple(int(i) for i in k), offset=offset,
        demand=pop.demand)


def linus_revenue(pop: Population, m: int, p0: float) -> float:
    """Roaming revenue collected at the APs of Linus types ``1..m-1``."""
    n_bill = pop.counts[m - 1:].sum()
    visitors = pop.roam_weight * n_bill + pop.alien_ratio
    linus = slice(0, m - 1)
    return visitors * float(np.dot(pop.counts[linus], pop.g(pop.qualities[linus], p0)))


@dataclass(frozen=True)
class SolveReport:
    """Result of a price/fee optimization for one or all critical types.

    Profits and bounds are all in total-profit units: the Linus revenue and
    the objective offset are added to the separable bounds.
    """

    contract: Contract
    m_star: int
    exact_profit: float
    decomposed_profit: float
    dual_upper_bound: float
    dynamic_lower_bound: float
    decomposition_gap: float
    iterations: int
    converged: bool
    merges: int
    stage: str
    per_type_payoffs: np.ndarray
    valid: bool = True
    candidate_profits: tuple[tuple[int, float], ...] = ()

    @property
    def profit(self) -> float:
        return self.exact_profit


def _all_linus_report(pop: Population, p0: float) -> SolveReport:
    c = Contract.all_linus(pop.n_types, p0)
    profit = operator_profit(pop, c)
    return SolveReport(c, pop.n_types + 1, profit, profit, profit, profit, 0.0, 0, True, 0,
                       "all-linus", np.zeros(pop.n_types))


def _near_linus(prices, fees) -> bool:
    return bool(np.any((np.asarray(prices) == 0.0) & (np.abs(fees) <= PROFIT_TIE)))


def solve_given_m(pop: Population, m: int, epsilon: float = 1e-4, *,
                  include_coupling: bool = True,
                  max_iterations: int = MAX_DUAL_ITERATIONS,
                  tolerance: float = TOLERANCE,
                  grid_points: int = GRID_POINTS) -> SolveReport:
    """Optimal prices and fees when types ``m..K`` are Bills.

    ``p0`` is fixed at ``p_max``. The report is marked ``valid=False`` when
    the resulting contract does not realize critical type ``m`` (a Bill item
    at price 0 whose fee is 0 up to ``PROFIT_TIE`` is really Linus) or fails
    the structural feasibility check; such candidates are skipped by
    :func:`solve`.
    """
    _check_m(pop, m)
    p0 = pop.price_cap
    if m == pop.n_types + 1:
        return _all_linus_report(pop, p0)
    obj = build_objective(pop, m, p0, include_coupling)
    prices, dual, lower, merges, stage = optimize_chain(
        obj, epsilon, max_iterations, tolerance, grid_points)
    fees = optimal_fees(pop, m, prices, p0)
    c = Contract.threshold(pop.n_types, m, prices, fees, p0)
    const = linus_revenue(pop, m, p0) + obj.offset
    exact = operator_profit(pop, c)
    decomposed = const + lower
    valid = (c.critical_type == m and not _near_linus(prices, fees)
             and check_theorem1(pop, c).is_feasible)
    return SolveReport(
        contract=c, m_star=m, exact_profit=exact, decomposed_profit=decomposed,
        dual_upper_bound=const + dual.upper_bound, dynamic_lower_bound=decomposed,
        decomposition_gap=exact - decomposed, iterations=dual.iterations,
        converged=dual.converged, merges=merges, stage=stage,
        per_type_payoffs=payoffs(pop, c, market_stats(pop, c)), valid=valid)


def solve(pop: Population, epsilon: float = 1e-4, **kwargs) -> SolveReport:
    """Search every critical type and return the most profitable contract.

    Profits within ``PROFIT_TIE`` tie and go to the smaller critical type. A
    lone Bill at ``p_max`` earns exactly what Linus earns, so such ties are
    common near ``m = K + 1``. Keyword arguments are forwarded to
    :func:`solve_given_m`.
    """
    best = None
    trace = []
    for m in range(1, pop.n_types + 2):
        rep = solve_given_m(pop, m, epsilon, **kwargs)
        trace.append((m, rep.exact_profit if rep.valid else float("nan")))
        if rep.valid and (best is None or rep.exact_profit > best.exact_profit + PROFIT_TIE):
            best = rep
    return replace(best, candidate_profits=tuple(trace))
