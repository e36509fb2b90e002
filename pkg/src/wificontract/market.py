"""Market primitives for a crowdsourced Wi-Fi community network.

Access-point owners (APOs) come in K quality types. Each type either joins
as a *Linus* (shares its AP for free, pays nothing, item ``(0, 0)``) or as a
*Bill* (charges roaming users a price ``p`` at its AP and pays the operator a
subscription fee ``delta``). Aliens are users without an AP who always pay.

Indexing conventions used throughout the package:

* type indices ``k`` are 0-based positions into the quality vector;
* the critical type ``m`` is 1-based: types ``1..m-1`` are Linus and types
  ``m..K`` are Bills, so ``m = 1`` means all Bills and ``m = K + 1`` all Linus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DemandFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class DimensionError(ValueError):
    """Raised when a contract does not match the population it is used with."""


class NotABillError(ValueError):
    """Raised when a Bill-only quantity is requested for a Linus type."""


def hyperbolic_demand(theta, p, T):
    """Connection time ``T / (1 + p / theta)`` without argument checks."""
    return T / (1.0 + p / theta)


def demand(theta, p, T: float = 1.0):
    """Connection time bought by a user at an AP of quality ``theta``.

    Args:
      theta: AP quality, strictly positive (scalar or array).
      p: Price per unit time, nonnegative.
      T: Subscription period, strictly positive.

    Returns:
      ``T / (1 + p / theta)``, with the broadcast shape of the inputs.

    Raises:
      ValueError: If ``theta <= 0``, ``T <= 0`` or ``p < 0``.
    """
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(theta <= 0) or not T > 0:
        raise ValueError("demand requires theta > 0 and T > 0")
    if np.any(p < 0):
        raise ValueError("demand requires p >= 0")
    out = hyperbolic_demand(theta, p, float(T))
    return float(out) if out.ndim == 0 else out


def revenue_g(theta, p, T: float = 1.0):
    """Average payment ``p * demand(theta, p, T)`` of one roaming user."""
    d = demand(theta, p, T)
    out = np.asarray(p, dtype=float) * d
    return float(out) if out.ndim == 0 else out


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_common(n_aliens: float, period: float, price_cap: float) -> None:
    if not (math.isfinite(n_aliens) and n_aliens >= 0):
        raise ValueError(f"n_aliens must be finite and >= 0, got {n_aliens}")
    if not (math.isfinite(period) and period > 0):
        raise ValueError(f"period must be > 0, got {period}")
    if not (math.isfinite(price_cap) and price_cap > 0):
        raise ValueError(f"price_cap must be > 0, got {price_cap}")


def _check_qualities(q: np.ndarray) -> None:
    if q.ndim != 1 or q.size < 1:
        raise ValueError("qualities must be a non-empty vector")
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise ValueError("qualities must be finite and > 0")
    if np.any(np.diff(q) <= 0):
        raise ValueError("qualities must be strictly increasing")


@dataclass(frozen=True, eq=False)
class Population:
    """Homogeneous-mobility market instance.

    Attributes:
      qualities: Strictly increasing AP qualities ``theta_k``.
      counts: Number of APOs of each type, all >= 1.
      eta: Probability an APO stays home (does not roam).
      n_aliens: Number of Aliens ``N_A``.
      period: Subscription period ``T``.
      price_cap: Upper bound ``p_max`` on every price.
      demand: Demand model ``(theta, p, T) -> time``.
    """

    qualities: np.ndarray
    counts: np.ndarray
    eta: float
    n_aliens: float = 0.0
    period: float = 1.0
    price_cap: float = 1.0
    demand: DemandFn = field(default=hyperbolic_demand, repr=False)

    def __post_init__(self):
        q = _readonly(self.qualities)
        n = _readonly(self.counts)
        _check_qualities(q)
        if n.shape != q.shape:
            raise DimensionError("counts and qualities must have equal length")
        if not np.all(np.isfinite(n)) or np.any(n < 1):
            raise ValueError("every type needs at least one APO")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        _check_common(self.n_aliens, self.period, self.price_cap)
        object.__setattr__(self, "qualities", q)
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "n_aliens", float(self.n_aliens))
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "price_cap", float(self.price_cap))

    @property
    def n_types(self) -> int:
        return int(self.qualities.size)

    @property
    def n_apos(self) -> float:
        return float(self.counts.sum())

    @property
    def alien_ratio(self) -> float:
        """``a = N_A / N``."""
        return self.n_aliens / self.n_apos

    @property
    def roam_weight(self) -> float:
        """``(1 - eta) / N``: chance a given APO roams to a given AP."""
        return (1.0 - self.eta) / self.n_apos

    def tail_counts(self) -> np.ndarray:
        """``s_k = sum_{i >= k} N_i`` for every type (0-based ``k``)."""
        return np.cumsum(self.counts[::-1])[::-1]

    def g(self, theta, p):
        """Revenue per roaming user under this population's demand."""
        return p * self.demand(theta, p, self.period)

    def g_type(self, k: int, p):
        return self.g(self.qualities[k], p)


@dataclass(frozen=True)
class ContractItem:
    """A ``(price, fee)`` pair. ``(0, 0)`` is the Linus item."""

    price: float
    fee: float

    def __post_init__(self):
        if not (math.isfinite(self.price) and self.price >= 0):
            raise ValueError(f"price must be finite and >= 0, got {self.price}")
        if not math.isfinite(self.fee):
            raise ValueError(f"fee must be finite, got {self.fee}")
        object.__setattr__(self, "price", float(self.price))
        object.__setattr__(self, "fee", float(self.fee))

    @property
    def is_linus(self) -> bool:
        return self.price == 0.0 and self.fee == 0.0


LINUS = ContractItem(0.0, 0.0)


def linus_payoff() -> float:
    """Payoff of a Linus APO, normalized to zero."""
    return 0.0


@dataclass(frozen=True)
class Contract:
    """One item per type plus the price ``p0`` charged at Linus APs."""

    items: tuple[ContractItem, ...]
    linus_price: float

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("a contract needs at least one item")
        if not all(isinstance(it, ContractItem) for it in items):
            raise TypeError("items must be ContractItem instances")
        p0 = float(self.linus_price)
        if not (math.isfinite(p0) and p0 >= 0):
            raise ValueError(f"linus_price must be finite and >= 0, got {p0}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "linus_price", p0)

    @classmethod
    def from_arrays(cls, prices, fees, linus_price: float) -> "Contract":
        prices = np.asarray(prices, dtype=float)
        fees = np.asarray(fees, dtype=float)
        if prices.shape != fees.shape or prices.ndim != 1:
            raise DimensionError("prices and fees must be vectors of equal length")
        return cls(tuple(ContractItem(p, d) for p, d in zip(prices, fees)), linus_price)

    @classmethod
    def threshold(cls, n_types: int, m: int, bill_prices, bill_fees,
                  linus_price: float) -> "Contract":
        """Contract with Linus types ``1..m-1`` and the given Bill items."""
        if not 1 <= m <= n_types + 1:
            raise ValueError(f"critical type must lie in 1..{n_types + 1}")
        bill_prices = np.asarray(bill_prices, dtype=float).reshape(-1)
        bill_fees = np.asarray(bill_fees, dtype=float).reshape(-1)
        if bill_prices.size != n_types - m + 1 or bill_fees.size != bill_prices.size:
            raise DimensionError("need one Bill price and fee per type m..K")
        items = [LINUS] * (m - 1)
        items += [ContractItem(p, d) for p, d in zip(bill_prices, bill_fees)]
        return cls(tuple(items), linus_price)

    @classmethod
    def all_linus(cls, n_types: int, linus_price: float) -> "Contract":
        return cls((LINUS,) * n_types, linus_price)

    @property
    def n_types(self) -> int:
        return len(self.items)

    @property
    def prices(self) -> np.ndarray:
        return np.array([it.price for it in self.items])

    @property
    def fees(self) -> np.ndarray:
        return np.array([it.fee for it in self.items])

    @property
    def linus_mask(self) -> np.ndarray:
        return np.array([it.is_linus for it in self.items])

    @property
    def bill_types(self) -> np.ndarray:
        return np.flatnonzero(~self.linus_mask)

    @property
    def linus_types(self) -> np.ndarray:
        return np.flatnonzero(self.linus_mask)

    @property
    def critical_type(self) -> int | None:
        """``m`` if the Linus types form a prefix ``1..m-1``, else ``None``."""
        mask = self.linus_mask
        m = int(np.argmin(mask)) + 1 if not mask.all() else mask.size + 1
        if mask[: m - 1].all() and not mask[m - 1:].any():
            return m
        return None


@dataclass(frozen=True)
class MarketStats:
    """Derived statistics of a (population, contract) pair.

    Attributes:
      omega: Expected paying users at one Bill AP, excluding its owner.
      mu: Expected Bills plus Aliens visiting one AP.
      nu: Expected roaming payment base shared by all Bills.
      beta: Expected roaming payment of each Bill type (0 for Linus types).
    """

    omega: float
    mu: float
    nu: float
    beta: np.ndarray


def _check_dims(pop: Population, c: Contract) -> None:
    if c.n_types != pop.n_types:
        raise DimensionError(
            f"contract has {c.n_types} items but population has {pop.n_types} types")


def market_stats(pop: Population, c: Contract) -> MarketStats:
    """Compute omega, mu, nu and beta for ``c`` offered to ``pop``."""
    _check_dims(pop, c)
    w = pop.roam_weight
    a = pop.alien_ratio
    bill = ~c.linus_mask
    n_bill = float(pop.counts[bill].sum())
    spend = pop.g(pop.qualities, np.where(bill, c.prices, c.linus_price))
    nu = w * float(np.dot(pop.counts, spend))
    beta = np.where(bill, nu - w * spend, 0.0)
    beta.setflags(write=False)
    return MarketStats(omega=w * (n_bill - 1.0) + a, mu=w * n_bill + a, nu=nu, beta=beta)


def bill_payoff(pop: Population, c: Contract, stats: MarketStats, k: int) -> float:
    """Payoff ``omega g_k(p_k) - delta_k - beta_k`` of Bill type ``k``."""
    item = c.items[k]
    if item.is_linus:
        raise NotABillError(f"type {k} holds the Linus item")
    return stats.omega * float(pop.g_type(k, item.price)) - item.fee - float(stats.beta[k])


def cross_payoff(pop: Population, c: Contract, stats: MarketStats, k: int,
                 item: ContractItem) -> float:
    """Payoff of type ``k`` when it picks ``item`` instead of its own.

    The deviator's roaming payment is held at its designed value. For a Bill
    deviator this is ``beta_k``. A Linus deviator has no own-AP term in the
    payment base, so it pays ``nu`` and its AP attracts ``mu`` users.
    """
    if item.is_linus:
        return linus_payoff()
    if item not in c.items:
        raise ValueError("item is not offered by the contract")
    gain = float(pop.g_type(k, item.price))
    if c.items[k].is_linus:
        return stats.mu * gain - item.fee - stats.nu
    return stats.omega * gain - item.fee - float(stats.beta[k])


def payoffs(pop: Population, c: Contract, stats: MarketStats | None = None) -> np.ndarray:
    """Own-item payoff of every type (0 for Linus types)."""
    stats = market_stats(pop, c) if stats is None else stats
    return np.array([0.0 if it.is_linus else bill_payoff(pop, c, stats, k)
                     for k, it in enumerate(c.items)])


def operator_profit(pop: Population, c: Contract) -> float:
    """Operator profit: roaming revenue at Linus APs plus Bill fees."""
    _check_dims(pop, c)
    bill = ~c.linus_mask
    n_bill = float(pop.counts[bill].sum())
    visitors = pop.roam_weight * n_bill + pop.alien_ratio
    linus_rev = pop.g(pop.qualities[~bill], c.linus_price)
    return (visitors * float(np.dot(pop.counts[~bill], linus_rev))
            + float(np.dot(pop.counts[bill], c.fees[bill])))

