"""Optimal contract when APOs differ in quality and mobility.

For a nonincreasing critical vector ``m`` the Bill cells are linearly ordered
by quality, then mobility (the *price chain*). The optimal fees follow the
chain: the first cell's IR binds and every later cell's IC toward its chain
predecessor binds. Substituting them makes the Bill-side profit separable
along the chain, so the homogeneous price machinery applies verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .feasibility import check_theorem2_hetero
from .hetero_market import (
    HeteroContract,
    HeteroPopulation,
    hetero_operator_profit,
    hetero_payoffs,
)
from .oracle import chain_cells, critical_vectors
from .pricing import MAX_DUAL_ITERATIONS, SeparableObjective, optimize_chain
from .scalar import GRID_POINTS, TOLERANCE
from .solver import PROFIT_TIE, InfeasiblePricesError, _near_linus

MAX_CRITICAL_VECTORS = 1_000_000


@dataclass(frozen=True)
class PriceChain:
    """Bill cells of a critical vector in chain order.

    ``links`` pairs each cell with its chain predecessor (``None`` for the
    first cell, which is the IR-binding anchor).
    """

    m: tuple[int, ...]
    order: tuple[tuple[int, int], ...]

    @classmethod
    def from_critical(cls, m, n_types: int) -> "PriceChain":
        m = _check_vector(m, n_types)
        return cls(m, tuple(chain_cells(m, n_types)))

    @property
    def anchor(self) -> tuple[int, int] | None:
        return self.order[0] if self.order else None

    @property
    def links(self) -> tuple:
        return tuple(zip((None,) + self.order[:-1], self.order))

    def mask(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        for k, l in self.order:
            out[k, l] = True
        return out

    def gather(self, matrix) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        return np.array([matrix[k, l] for k, l in self.order])

    def scatter(self, values, shape) -> np.ndarray:
        out = np.zeros(shape)
        for (k, l), v in zip(self.order, values):
            out[k, l] = v
        return out


def _check_vector(m, n_types: int) -> tuple[int, ...]:
    m = tuple(int(x) for x in m)
    if any(not 1 <= x <= n_types + 1 for x in m):
        raise ValueError(f"critical types must lie in 1..{n_types + 1}")
    if any(m[l] < m[l + 1] for l in range(len(m) - 1)):
        raise ValueError("critical vector must be nonincreasing")
    return m


def _level_stats(pop: HeteroPopulation, chain: PriceChain) -> tuple[float, np.ndarray]:
    w = pop.roam_weights
    mu = float((pop.counts * chain.mask(pop.counts.shape) * w[None, :]).sum()) + pop.alien_ratio
    return mu, mu - w


def _linus_spend(pop: HeteroPopulation, chain: PriceChain, p0: float) -> float:
    linus = ~chain.mask(pop.counts.shape)
    return float((pop.counts * pop.g(pop.qualities[:, None], p0))[linus].sum())


def hetero_optimal_fees(pop: HeteroPopulation, m, prices, p0: float) -> np.ndarray:
    """Revenue-maximizing fee matrix for critical vector ``m``.

    The anchor (first chain cell) pays ``omega_j g(p) - beta``, which makes its
    payoff zero. Each later cell adds ``omega_l (g_k(p_{k,l}) - g_k(p_prev))``
    to its chain predecessor's fee, where ``k`` and ``l`` are the cell's own
    quality and mobility levels. Linus cells get fee 0.
    """
    K, L = pop.counts.shape
    chain = PriceChain.from_critical(m, K)
    if len(chain.m) != L:
        raise ValueError(f"critical vector must have length {L}")
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (K, L):
        raise ValueError(f"prices must have shape {(K, L)}")
    fees = np.zeros((K, L))
    if not chain.order:
        return fees
    p = chain.gather(prices)
    if np.any(p < 0) or np.any(p > pop.price_cap) or np.any(np.diff(p) < 0):
        raise InfeasiblePricesError("chain prices must be nondecreasing within [0, p_max]")
    mu, omega = _level_stats(pop, chain)
    ks = np.array([k for k, _ in chain.order])
    ls = np.array([l for _, l in chain.order])
    theta = pop.qualities[ks]
    own = pop.g(theta, p)
    nu = float(np.dot(pop.counts[ks, ls], own)) + _linus_spend(pop, chain, p0)
    l0 = ls[0]
    first = omega[l0] * own[0] - pop.roam_weights[l0] * (nu - own[0])
    steps = omega[ls[1:]] * (own[1:] - pop.g(theta[1:], p[:-1]))
    return chain.scatter(first + np.concatenate([[0.0], np.cumsum(steps)]), (K, L))


def hetero_build_objective(pop: HeteroPopulation, m, p0: float,
                           include_coupling: bool = False) -> SeparableObjective:
    """Separable chain objective for critical vector ``m``.

    With ``S_t`` the number of APOs at or after chain position ``t``, term
    ``t`` is ``S_t omega_{l_t} g_{k_t}(p) - S_{t+1} omega_{l_{t+1}} g_{k_{t+1}}(p)``,
    and the anchor term also gains ``(1 - eta_j)/N S_1 g(p)``. The successor of
    the last cell of a row is the first Bill of the next row. When the anchor
    is the only cell and sits at ``(K, L)`` the anchor surcharge is dropped,
    leaving ``omega_L N_{K,L} g_K(p)``. ``include_coupling`` has the same
    meaning as for the homogeneous objective.
    """
    K, L = pop.counts.shape
    chain = PriceChain.from_critical(m, K)
    if not chain.order:
        raise ValueError("critical vector has no Bill cells")
    mu, omega = _level_stats(pop, chain)
    w = pop.roam_weights
    ks = np.array([k for k, _ in chain.order])
    ls = np.array([l for _, l in chain.order])
    n = pop.counts[ks, ls]
    tails = np.cumsum(n[::-1])[::-1]
    tails_next = np.append(tails[1:], 0.0)
    own_coef = omega[ls] * tails
    l0 = ls[0]
    single_corner = len(ks) == 1 and chain.order[0] == (K - 1, L - 1)
    if include_coupling or not single_corner:
        own_coef[0] += w[l0] * tails[0]
    next_l = np.append(ls[1:], ls[-1])
    next_k = np.append(ks[1:], ks[-1])
    next_coef = omega[next_l] * tails_next
    offset = 0.0
    if include_coupling:
        own_coef -= w[l0] * tails[0] * n
        offset = -w[l0] * tails[0] * _linus_spend(pop, chain, p0)
    return SeparableObjective(
        own_theta=pop.qualities[ks].copy(), own_coef=own_coef,
        next_theta=pop.qualities[next_k].copy(), next_coef=next_coef,
        price_cap=pop.price_cap, period=pop.period, m=chain.m, tail_counts=tails,
        labels=chain.order, offset=offset, demand=pop.demand)


@dataclass(frozen=True)
class HeteroSolveReport:
    """Heterogeneous analogue of :class:`wificontract.solver.SolveReport`."""

    contract: HeteroContract
    m_star: tuple[int, ...]
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
    candidate_profits: tuple = ()

    @property
    def profit(self) -> float:
        return self.exact_profit


def hetero_solve_given_m(pop: HeteroPopulation, m, epsilon: float = 1e-4, *,
                         include_coupling: bool = True,
                         max_iterations: int = MAX_DUAL_ITERATIONS,
                         tolerance: float = TOLERANCE,
                         grid_points: int = GRID_POINTS) -> HeteroSolveReport:
    """Optimal chain prices and fees for critical vector ``m`` with ``p0 = p_max``.

    The report is ``valid=False`` when the contract fails the structural
    feasibility check or does not realize ``m`` (including Bill cells at price
    0 with a fee of 0 up to ``PROFIT_TIE``).
    """
    K, L = pop.counts.shape
    chain = PriceChain.from_critical(m, K)
    if len(chain.m) != L:
        raise ValueError(f"critical vector must have length {L}")
    p0 = pop.price_cap
    mu, _ = _level_stats(pop, chain)
    linus_rev = mu * _linus_spend(pop, chain, p0)
    if not chain.order:
        c = HeteroContract.from_arrays(np.zeros((K, L)), np.zeros((K, L)), p0,
                                       np.zeros((K, L), dtype=bool))
        profit = hetero_operator_profit(pop, c)
        return HeteroSolveReport(c, chain.m, profit, profit, profit, profit, 0.0, 0, True,
                                 0, "all-linus", np.zeros((K, L)))
    obj = hetero_build_objective(pop, chain.m, p0, include_coupling)
    p, dual, lower, merges, stage = optimize_chain(
        obj, epsilon, max_iterations, tolerance, grid_points)
    prices = chain.scatter(p, (K, L))
    fees = hetero_optimal_fees(pop, chain.m, prices, p0)
    c = HeteroContract.from_arrays(prices, fees, p0, chain.mask((K, L)))
    const = linus_rev + obj.offset
    exact = hetero_operator_profit(pop, c)
    decomposed = const + lower
    valid = (c.critical_types == chain.m and not _near_linus(p, chain.gather(fees))
             and check_theorem2_hetero(pop, c).is_feasible)
    return HeteroSolveReport(
        contract=c, m_star=chain.m, exact_profit=exact, decomposed_profit=decomposed,
        dual_upper_bound=const + dual.upper_bound, dynamic_lower_bound=decomposed,
        decomposition_gap=exact - decomposed, iterations=dual.iterations,
        converged=dual.converged, merges=merges, stage=stage,
        per_type_payoffs=hetero_payoffs(pop, c), valid=valid)


def hetero_solve(pop: HeteroPopulation, epsilon: float = 1e-4, *,
                 max_vectors: int = MAX_CRITICAL_VECTORS, **kwargs) -> HeteroSolveReport:
    """Search all nonincreasing critical vectors for the most profitable contract.

    Profits within ``PROFIT_TIE`` tie and go to the lexicographically
    smallest vector. ``candidate_profits``
    records every vector's profit (``nan`` for infeasible candidates).
    """
    K, L = pop.counts.shape
    best = None
    trace = []
    for m in critical_vectors(K, L, cap=max_vectors):
        rep = hetero_solve_given_m(pop, m, epsilon, **kwargs)
        trace.append((m, rep.exact_profit if rep.valid else float("nan")))
        if rep.valid and (best is None or rep.exact_profit > best.exact_profit + PROFIT_TIE):
            best = rep
    return replace(best, candidate_profits=tuple(trace))
