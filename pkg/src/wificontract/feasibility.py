"""Feasibility of contracts: direct IC/IR enumeration and structural conditions.

Two independent routes decide whether a contract is feasible (incentive
compatible and individually rational):

* :func:`check_ic_ir` compares every type's own payoff with every
  alternative item and with zero;
* :func:`check_theorem1` / :func:`check_theorem2_hetero` evaluate the
  closed-form structural conditions (Linus-prefix partition, price ordering,
  fee bounds, pairwise fee sandwich).

Both routes must agree. Every constraint is recorded with a *slack*
(positive means satisfied with margin); a slack below ``-tolerance`` is a
violation and ``|slack| <= BINDING_TOL`` marks the constraint as binding.
Structural constraints with no natural magnitude use slack ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .hetero_market import (
    HeteroContract,
    HeteroPopulation,
    hetero_cross_payoff,
    hetero_payoffs,
    hetero_stats,
)
from .market import LINUS, Contract, Population, cross_payoff, market_stats, payoffs

FEASIBILITY_TOL = 1e-9
BINDING_TOL = 1e-7


class InfeasibleContractError(ValueError):
    """Raised when an operation requires a feasible contract."""


class Violation(NamedTuple):
    constraint: str
    types: tuple
    slack: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of a feasibility check.

    ``critical_type`` is an int for homogeneous contracts and a tuple of
    per-level critical types for heterogeneous ones; ``None`` when the Linus
    types do not form a prefix.
    """

    is_feasible: bool
    violated: tuple[Violation, ...]
    critical_type: int | tuple[int, ...] | None
    binding: tuple[Violation, ...]

    def failed_constraints(self) -> set[str]:
        return {v.constraint for v in self.violated}


class _Ledger:
    def __init__(self, tolerance: float):
        self.tol = tolerance
        self.violated: list[Violation] = []
        self.binding: list[Violation] = []

    def add(self, constraint: str, types: tuple, slack: float) -> None:
        v = Violation(constraint, types, float(slack))
        if slack < -self.tol:
            self.violated.append(v)
        if abs(slack) <= BINDING_TOL:
            self.binding.append(v)

    def report(self, critical) -> FeasibilityReport:
        return FeasibilityReport(not self.violated, tuple(self.violated),
                                 critical, tuple(self.binding))


def _price_range(led: _Ledger, cap: float, p0: float, bills) -> None:
    led.add("price-range", ("p0",), min(p0, cap - p0))
    for cell, p in bills:
        led.add("price-range", (cell,), cap - p)


# ---------------------------------------------------------------------------
# homogeneous mobility


def check_ic_ir(pop, c, tolerance: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Direct IC/IR enumeration over every type and every offered item.

    Violations are ordered by deviating type, then by target (the Linus
    item first, then Bill items by type). Prices outside ``[0, p_max]`` are
    reported as ``price-range`` violations since such items lie outside the
    contract space.
    """
    if isinstance(pop, HeteroPopulation):
        return _check_ic_ir_hetero(pop, c, tolerance)
    stats = market_stats(pop, c)
    own = payoffs(pop, c, stats)
    bills = c.bill_types
    led = _Ledger(tolerance)
    _price_range(led, pop.price_cap, c.linus_price, [(int(k), c.items[k].price) for k in bills])
    for k in range(pop.n_types):
        led.add("IR", (k,), own[k])
        if not c.items[k].is_linus:
            led.add("IC", (k, None), own[k] - cross_payoff(pop, c, stats, k, LINUS))
        for i in bills:
            if i != k:
                alt = cross_payoff(pop, c, stats, k, c.items[i])
                led.add("IC", (k, int(i)), own[k] - alt)
    return led.report(c.critical_type)


def check_theorem1(pop: Population, c: Contract,
                   tolerance: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Structural feasibility conditions for homogeneous mobility.

    Constraint ids: ``partition`` (Linus types form a prefix), ``price-range``
    and ``price-order`` (Bill prices in ``[0, p_max]`` and nondecreasing),
    ``linus-ic`` (fee lower bound from Linus incentives), ``bill-ir`` (fee
    upper bound), ``fee-lower`` / ``fee-upper`` (pairwise fee sandwich).
    """
    stats = market_stats(pop, c)
    led = _Ledger(tolerance)
    bills = [int(k) for k in c.bill_types]
    linus = [int(k) for k in c.linus_types]
    m = c.critical_type
    if m is None:
        for j in linus:
            for k in bills:
                if k < j:
                    led.add("partition", (k, j), -math.inf)
    p, d = c.prices, c.fees
    _price_range(led, pop.price_cap, c.linus_price, [(k, p[k]) for k in bills])
    for a, i in enumerate(bills):
        for k in bills[a + 1:]:
            led.add("price-order", (i, k), p[k] - p[i])
    om, mu, nu = stats.omega, stats.mu, stats.nu
    g = lambda t, x: float(pop.g_type(t, x))
    for k in bills:
        for j in linus:
            led.add("linus-ic", (k, j), d[k] - (mu * g(j, p[k]) - nu))
        led.add("bill-ir", (k,), om * g(k, p[k]) - stats.beta[k] - d[k])
    for a, i in enumerate(bills):
        for k in bills[a + 1:]:
            diff = d[k] - d[i]
            led.add("fee-lower", (i, k), diff - om * (g(i, p[k]) - g(i, p[i])))
            led.add("fee-upper", (i, k), om * (g(k, p[k]) - g(k, p[i])) - diff)
    return led.report(m)


# ---------------------------------------------------------------------------
# heterogeneous mobility


def _check_ic_ir_hetero(pop: HeteroPopulation, c: HeteroContract,
                        tolerance: float) -> FeasibilityReport:
    stats = hetero_stats(pop, c)
    own = hetero_payoffs(pop, c, stats)
    bills = c.bill_cells()
    led = _Ledger(tolerance)
    _price_range(led, pop.price_cap, c.linus_price, [(b, c.items[b[0]][b[1]].price) for b in bills])
    K, L = c.shape
    for k in range(K):
        for l in range(L):
            cell = (k, l)
            led.add("IR", (cell,), own[k, l])
            if not c.items[k][l].is_linus:
                led.add("IC", (cell, None), own[k, l])
            for b in bills:
                if b != cell:
                    alt = hetero_cross_payoff(pop, c, stats, cell, c.items[b[0]][b[1]])
                    led.add("IC", (cell, b), own[k, l] - alt)
    return led.report(c.critical_types)


def chain_links(m: tuple[int, ...], n_types: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Pairs ``(lower, upper)`` of Bill cells whose prices must be ordered.

    Implements the per-cell lower and upper neighbours of the price chain:
    within a row each Bill is bounded by its left and right neighbours, every
    Bill is bounded below by the last cell of the previous row, and the last
    cell of a row is bounded above by the first Bill of the next row.
    Links whose lower end is a Linus cell (price 0) are trivially satisfied
    and omitted. ``m`` holds 1-based per-level critical types.
    """
    L = len(m)
    K = n_types
    bill = lambda k, l: 0 <= k < K and k + 1 >= m[l]
    links = set()
    for l in range(L):
        for k in range(m[l] - 1, K):
            if l > 0 and bill(k, l - 1):
                links.add(((k, l - 1), (k, l)))
            if k > 0 and bill(k - 1, L - 1):
                links.add(((k - 1, L - 1), (k, l)))
            if l < L - 1:
                links.add(((k, l), (k, l + 1)))
            elif k + 1 < K:
                j = min(i for i in range(L) if k + 2 >= m[i])
                links.add(((k, l), (k + 1, j)))
    return sorted(links)


def check_theorem2_hetero(pop: HeteroPopulation, c: HeteroContract,
                          tolerance: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Structural feasibility conditions for heterogeneous mobility.

    Constraint ids: ``partition`` (per-level Linus prefix), ``critical-order``
    (critical types nonincreasing in the mobility level), ``price-range``,
    ``price-chain``, ``linus-ic``, ``bill-ir``, ``fee-lower``, ``fee-upper``.
    """
    stats = hetero_stats(pop, c)
    led = _Ledger(tolerance)
    K, L = c.shape
    mask = c.linus_mask
    m = c.critical_types
    if m is None:
        for l in range(L):
            if c.column(l).critical_type is None:
                led.add("partition", (l,), -math.inf)
    else:
        for l in range(L - 1):
            led.add("critical-order", (l, l + 1), m[l] - m[l + 1])
    bills = c.bill_cells()
    linus = [(k, l) for k in range(K) for l in range(L) if mask[k, l]]
    p, d = c.prices, c.fees
    _price_range(led, pop.price_cap, c.linus_price, [(b, p[b]) for b in bills])
    if m is not None:
        for lo, hi in chain_links(m, K):
            led.add("price-chain", (lo, hi), p[hi] - p[lo])
    g = lambda k, x: float(pop.g(pop.qualities[k], x))
    w = pop.roam_weights
    mu, nu = stats.mu, stats.nu
    for k, l in bills:
        for i, j in linus:
            led.add("linus-ic", ((k, l), (i, j)), d[k, l] - (mu * g(i, p[k, l]) - w[j] * nu))
        led.add("bill-ir", ((k, l),), stats.omega[l] * g(k, p[k, l]) - stats.beta[k, l] - d[k, l])
    for k, l in bills:
        for i, j in bills:
            if (i, j) == (k, l):
                continue
            diff = d[k, l] - d[i, j]
            led.add("fee-lower", ((i, j), (k, l)),
                    diff - stats.omega[j] * (g(i, p[k, l]) - g(i, p[i, j])))
            led.add("fee-upper", ((i, j), (k, l)),
                    stats.omega[l] * (g(k, p[k, l]) - g(k, p[i, j])) - diff)
    return led.report(m)


# ---------------------------------------------------------------------------
# structural audit


@dataclass(frozen=True)
class LemmaVerdict:
    name: str
    holds: bool
    detail: str = ""


def _strictly_greater(x: float, y: float, tol: float) -> bool:
    return x > y + tol


def _audit_pairs(name: str, pairs, tol: float) -> LemmaVerdict:
    bad = [pair for pair, ok in pairs if not ok]
    return LemmaVerdict(name, not bad, f"failing pairs: {bad[:5]}" if bad else "")


def structural_lemmas_audit(pop, c, tolerance: float = 1e-9) -> list[LemmaVerdict]:
    """Check the structural properties every feasible contract must have.

    Verdicts (homogeneous): ``fee-price-order`` (higher price iff higher
    fee), ``price-quality-order`` (higher quality never gets a lower price),
    ``critical-type`` (Linus types form a prefix). The heterogeneous audit
    adds ``critical-order`` and splits the price ordering into same-level,
    same-quality and cross orderings. Price orderings are audited in weak
    form because pooled Bill types legitimately share a price.

    Raises:
      InfeasibleContractError: If ``c`` fails the direct IC/IR check.
    """
    if not check_ic_ir(pop, c, tolerance).is_feasible:
        raise InfeasibleContractError("audit requires a feasible contract")
    if isinstance(pop, HeteroPopulation):
        return _audit_hetero(pop, c, tolerance)
    p, d = c.prices, c.fees
    bills = [int(k) for k in c.bill_types]
    fee_pairs, price_pairs = [], []
    for i in bills:
        for j in bills:
            if i == j:
                continue
            # p_i > p_j must force d_i > d_j, and conversely.
            ok = (not _strictly_greater(p[i], p[j], tolerance) or d[i] > d[j]) and \
                 (not _strictly_greater(d[i], d[j], tolerance) or p[i] > p[j])
            fee_pairs.append(((i, j), ok))
            if i > j:
                price_pairs.append(((i, j), p[i] >= p[j] - tolerance))
    return [
        _audit_pairs("fee-price-order", fee_pairs, tolerance),
        _audit_pairs("price-quality-order", price_pairs, tolerance),
        LemmaVerdict("critical-type", c.critical_type is not None),
    ]


def _audit_hetero(pop: HeteroPopulation, c: HeteroContract, tol: float) -> list[LemmaVerdict]:
    p, d = c.prices, c.fees
    bills = c.bill_cells()
    fee_pairs, same_l, same_k, cross = [], [], [], []
    for a in bills:
        for b in bills:
            if a == b:
                continue
            ok = (not _strictly_greater(p[a], p[b], tol) or d[a] > d[b]) and \
                 (not _strictly_greater(d[a], d[b], tol) or p[a] > p[b])
            fee_pairs.append(((a, b), ok))
            (k, l), (i, j) = a, b
            if l == j and k > i:
                same_l.append(((a, b), p[a] >= p[b] - tol))
            if k == i and l > j:
                same_k.append(((a, b), p[a] >= p[b] - tol))
            if l < j and k > i:
                cross.append(((a, b), p[a] >= p[b] - tol))
    m = c.critical_types
    order_ok = m is not None and all(m[l] >= m[l + 1] for l in range(len(m) - 1))
    return [
        _audit_pairs("fee-price-order", fee_pairs, tol),
        _audit_pairs("price-quality-order", same_l, tol),
        _audit_pairs("price-mobility-order", same_k, tol),
        _audit_pairs("price-cross-order", cross, tol),
        LemmaVerdict("critical-type", m is not None),
        LemmaVerdict("critical-order", order_ok),
    ]

