"""Market primitives when APOs differ in both quality and mobility.

Types form a K x L grid: row ``k`` is the quality level, column ``l`` the
stay-home probability ``eta_l`` (strictly increasing in ``l``). Cells are
addressed as 0-based ``(k, l)`` pairs. Per-column critical types ``m_l`` are
1-based, as in the homogeneous model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import (
    LINUS,
    Contract,
    ContractItem,
    DemandFn,
    DimensionError,
    NotABillError,
    Population,
    _check_common,
    _check_qualities,
    _readonly,
    hyperbolic_demand,
    linus_payoff,
)


@dataclass(frozen=True, eq=False)
class HeteroPopulation:
    """Market instance with K quality levels and L mobility levels.

    Attributes:
      qualities: Strictly increasing ``theta_k``, length K.
      etas: Strictly increasing ``eta_l`` in [0, 1], length L.
      counts: K x L matrix of APO counts (zeros allowed, total >= 1).
    """

    qualities: np.ndarray
    etas: np.ndarray
    counts: np.ndarray
    n_aliens: float = 0.0
    period: float = 1.0
    price_cap: float = 1.0
    demand: DemandFn = field(default=hyperbolic_demand, repr=False)

    def __post_init__(self):
        q = _readonly(self.qualities)
        e = _readonly(self.etas)
        n = _readonly(self.counts)
        _check_qualities(q)
        if e.ndim != 1 or e.size < 1:
            raise ValueError("etas must be a non-empty vector")
        if np.any(e < 0) or np.any(e > 1) or np.any(np.diff(e) <= 0):
            raise ValueError("etas must be strictly increasing within [0, 1]")
        if n.shape != (q.size, e.size):
            raise DimensionError(f"counts must have shape {(q.size, e.size)}")
        if not np.all(np.isfinite(n)) or np.any(n < 0) or n.sum() < 1:
            raise ValueError("counts must be >= 0 with a positive total")
        _check_common(self.n_aliens, self.period, self.price_cap)
        object.__setattr__(self, "qualities", q)
        object.__setattr__(self, "etas", e)
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "n_aliens", float(self.n_aliens))
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "price_cap", float(self.price_cap))

    @classmethod
    def from_population(cls, pop: Population) -> "HeteroPopulation":
        """Single-column (L = 1) view of a homogeneous population."""
        return cls(pop.qualities, [pop.eta], pop.counts[:, None], pop.n_aliens,
                   pop.period, pop.price_cap, pop.demand)

    @property
    def n_types(self) -> int:
        return int(self.qualities.size)

    @property
    def n_levels(self) -> int:
        return int(self.etas.size)

    @property
    def n_apos(self) -> float:
        return float(self.counts.sum())

    @property
    def alien_ratio(self) -> float:
        return self.n_aliens / self.n_apos

    @property
    def roam_weights(self) -> np.ndarray:
        """``(1 - eta_l) / N`` for each mobility level."""
        return (1.0 - self.etas) / self.n_apos

    def g(self, theta, p):
        return p * self.demand(theta, p, self.period)


@dataclass(frozen=True)
class HeteroContract:
    """K x L items plus the Linus-AP price ``p0``."""

    items: tuple[tuple[ContractItem, ...], ...]
    linus_price: float

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.items)
        if not rows or not rows[0] or len({len(r) for r in rows}) != 1:
            raise DimensionError("items must form a non-empty rectangular grid")
        p0 = float(self.linus_price)
        if not (math.isfinite(p0) and p0 >= 0):
            raise ValueError(f"linus_price must be finite and >= 0, got {p0}")
        object.__setattr__(self, "items", rows)
        object.__setattr__(self, "linus_price", p0)

    @classmethod
    def from_arrays(cls, prices, fees, linus_price: float,
                    bill_mask=None) -> "HeteroContract":
        """Build from K x L arrays. Cells outside ``bill_mask`` become Linus."""
        prices = np.asarray(prices, dtype=float)
        fees = np.asarray(fees, dtype=float)
        if prices.ndim != 2 or prices.shape != fees.shape:
            raise DimensionError("prices and fees must be K x L matrices")
        if bill_mask is None:
            bill_mask = np.ones(prices.shape, dtype=bool)
        rows = tuple(
            tuple(ContractItem(prices[k, l], fees[k, l]) if bill_mask[k, l] else LINUS
                  for l in range(prices.shape[1]))
            for k in range(prices.shape[0]))
        return cls(rows, linus_price)

    @classmethod
    def from_contract(cls, c: Contract) -> "HeteroContract":
        return cls(tuple((it,) for it in c.items), c.linus_price)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.items), len(self.items[0])

    @property
    def prices(self) -> np.ndarray:
        return np.array([[it.price for it in r] for r in self.items])

    @property
    def fees(self) -> np.ndarray:
        return np.array([[it.fee for it in r] for r in self.items])

    @property
    def linus_mask(self) -> np.ndarray:
        return np.array([[it.is_linus for it in r] for r in self.items])

    def bill_cells(self) -> list[tuple[int, int]]:
        """Bill cells sorted by quality, then mobility."""
        K, L = self.shape
        mask = self.linus_mask
        return [(k, l) for k in range(K) for l in range(L) if not mask[k, l]]

    def column(self, l: int) -> Contract:
        return Contract(tuple(r[l] for r in self.items), self.linus_price)

    @property
    def critical_types(self) -> tuple[int, ...] | None:
        """Per-column critical types, or ``None`` if some column has no prefix split."""
        out = []
        for l in range(self.shape[1]):
            m = self.column(l).critical_type
            if m is None:
                return None
            out.append(m)
        return tuple(out)


@dataclass(frozen=True)
class HeteroStats:
    """Derived statistics for a heterogeneous market.

    ``nu`` is the unweighted payment base ``sum N g``; a level-``l`` Bill pays
    ``(1 - eta_l) / N * nu`` minus its own-AP share.
    """

    omega: np.ndarray
    mu: float
    nu: float
    beta: np.ndarray


def _check_dims(pop: HeteroPopulation, c: HeteroContract) -> None:
    if c.shape != pop.counts.shape:
        raise DimensionError(f"contract shape {c.shape} != population {pop.counts.shape}")


def _spend(pop: HeteroPopulation, c: HeteroContract) -> tuple[np.ndarray, np.ndarray]:
    bill = ~c.linus_mask
    p = np.where(bill, c.prices, c.linus_price)
    return bill, pop.g(pop.qualities[:, None], p)


def hetero_stats(pop: HeteroPopulation, c: HeteroContract) -> HeteroStats:
    """Compute omega_l, mu, nu and beta_{k,l}."""
    _check_dims(pop, c)
    w = pop.roam_weights
    bill, spend = _spend(pop, c)
    mu = float((pop.counts * bill * w[None, :]).sum()) + pop.alien_ratio
    nu = float((pop.counts * spend).sum())
    beta = np.where(bill, w[None, :] * (nu - spend), 0.0)
    omega = mu - w
    beta.setflags(write=False)
    omega.setflags(write=False)
    return HeteroStats(omega=omega, mu=mu, nu=nu, beta=beta)


def hetero_bill_payoff(pop: HeteroPopulation, c: HeteroContract, stats: HeteroStats,
                       cell: tuple[int, int]) -> float:
    k, l = cell
    item = c.items[k][l]
    if item.is_linus:
        raise NotABillError(f"cell {cell} holds the Linus item")
    return (float(stats.omega[l]) * float(pop.g(pop.qualities[k], item.price))
            - item.fee - float(stats.beta[k, l]))


def hetero_cross_payoff(pop: HeteroPopulation, c: HeteroContract, stats: HeteroStats,
                        cell: tuple[int, int], item: ContractItem) -> float:
    """Payoff of type ``cell`` choosing ``item``; same convention as the homogeneous case."""
    if item.is_linus:
        return linus_payoff()
    k, l = cell
    gain = float(pop.g(pop.qualities[k], item.price))
    if c.items[k][l].is_linus:
        return stats.mu * gain - item.fee - float(pop.roam_weights[l]) * stats.nu
    return float(stats.omega[l]) * gain - item.fee - float(stats.beta[k, l])


def hetero_payoffs(pop: HeteroPopulation, c: HeteroContract,
                   stats: HeteroStats | None = None) -> np.ndarray:
    stats = hetero_stats(pop, c) if stats is None else stats
    K, L = c.shape
    out = np.zeros((K, L))
    for k, l in c.bill_cells():
        out[k, l] = hetero_bill_payoff(pop, c, stats, (k, l))
    return out


def hetero_operator_profit(pop: HeteroPopulation, c: HeteroContract) -> float:
    """Roaming revenue at Linus APs plus all Bill fees."""
    _check_dims(pop, c)
    bill, spend = _spend(pop, c)
    visitors = float((pop.counts * bill * pop.roam_weights[None, :]).sum()) + pop.alien_ratio
    return (visitors * float((pop.counts * spend)[~bill].sum())
            + float((pop.counts * c.fees)[bill].sum()))
