"""Random instances and contracts for property tests and the acceptance suite.

Populations: qualities sorted-uniform in [0.5, 20], counts uniform in
{1..50}, mobility uniform in [0.1, 0.9], alien ratio drawn from
{0, 0.05, 0.5, 5}, price cap uniform in [1, 10], period 1.

Contracts are either *constructed feasible* (random critical type, sorted
random prices strictly inside ``(0, p_max]``, closed-form optimal fees) or a
perturbation of such a contract. Perturbations may or may not break
feasibility; tests compare verdicts, not expected outcomes.
"""

from __future__ import annotations

import numpy as np

from .hetero_market import HeteroContract, HeteroPopulation
from .hetero_solver import PriceChain, hetero_optimal_fees
from .market import LINUS, Contract, ContractItem, Population
from .oracle import critical_vectors
from .solver import optimal_fees

ALIEN_RATIOS = (0.0, 0.05, 0.5, 5.0)


def _qualities(rng: np.random.Generator, K: int) -> np.ndarray:
    while True:
        q = np.sort(rng.uniform(0.5, 20.0, K))
        if np.all(np.diff(q) > 0):
            return q


def random_population(rng: np.random.Generator, n_types: int | None = None,
                      max_types: int = 4) -> Population:
    K = int(rng.integers(1, max_types + 1)) if n_types is None else n_types
    counts = rng.integers(1, 51, K).astype(float)
    a = float(rng.choice(ALIEN_RATIOS))
    return Population(_qualities(rng, K), counts, float(rng.uniform(0.1, 0.9)),
                      a * counts.sum(), 1.0, float(rng.uniform(1.0, 10.0)))


def random_hetero_population(rng: np.random.Generator, n_types: int,
                             n_levels: int) -> HeteroPopulation:
    while True:
        etas = np.sort(rng.uniform(0.1, 0.9, n_levels))
        if np.all(np.diff(etas) > 0):
            break
    counts = rng.integers(1, 51, (n_types, n_levels)).astype(float)
    a = float(rng.choice(ALIEN_RATIOS))
    return HeteroPopulation(_qualities(rng, n_types), etas, counts, a * counts.sum(), 1.0,
                            float(rng.uniform(1.0, 10.0)))


def random_small_hetero(rng: np.random.Generator, max_cells: int = 8) -> HeteroPopulation:
    """Random shape with ``K * L <= max_cells`` and ``L >= 2`` when possible."""
    shapes = [(K, L) for K in range(1, max_cells + 1) for L in range(1, max_cells + 1)
              if K * L <= max_cells and (L >= 2 or K * 2 > max_cells)]
    K, L = shapes[int(rng.integers(len(shapes)))]
    return random_hetero_population(rng, K, L)


def _sorted_prices(rng: np.random.Generator, n: int, cap: float) -> np.ndarray:
    # strictly positive so that no Bill item coincides with the Linus item
    return np.sort(rng.uniform(0.0, 1.0, n) * cap * 0.999 + cap * 0.001)


def random_feasible_contract(rng: np.random.Generator, pop: Population) -> Contract:
    K = pop.n_types
    m = int(rng.integers(1, K + 2))
    p0 = float(rng.uniform(0.0, pop.price_cap))
    prices = _sorted_prices(rng, K - m + 1, pop.price_cap)
    return Contract.threshold(K, m, prices, optimal_fees(pop, m, prices, p0), p0)


def perturb_contract(rng: np.random.Generator, pop: Population, c: Contract) -> Contract:
    """Apply one random edit to ``c``: fee shift, price change, swap or role flip."""
    items = list(c.items)
    bills = [int(k) for k in c.bill_types]
    scale = max(1e-3, float(np.abs(c.fees).max()) if bills else 1.0)
    kind = int(rng.integers(6))
    if bills and kind == 0:
        k = bills[int(rng.integers(len(bills)))]
        items[k] = ContractItem(items[k].price, items[k].fee + rng.normal() * 0.2 * scale)
    elif bills and kind == 1:
        k = bills[int(rng.integers(len(bills)))]
        items[k] = ContractItem(float(rng.uniform(0.001, 1.0) * pop.price_cap), items[k].fee)
    elif len(bills) >= 2 and kind == 2:
        i, j = rng.choice(bills, 2, replace=False)
        items[i], items[j] = (ContractItem(items[j].price, items[i].fee),
                              ContractItem(items[i].price, items[j].fee))
    elif bills and kind == 3:
        items[bills[int(rng.integers(len(bills)))]] = LINUS
    elif kind == 4:
        k = int(rng.integers(len(items)))
        items[k] = ContractItem(float(rng.uniform(0.001, 1.0) * pop.price_cap),
                                float(rng.normal() * scale))
    else:
        k = int(rng.integers(len(items)))
        if not items[k].is_linus:
            items[k] = ContractItem(items[k].price, items[k].fee - abs(rng.normal()) * 0.05 * scale)
        else:
            return Contract(tuple(items), float(rng.uniform(0.0, pop.price_cap)))
    return Contract(tuple(items), c.linus_price)


def random_contract(rng: np.random.Generator, pop: Population) -> Contract:
    """Constructed-feasible with probability 1/2, otherwise perturbed."""
    c = random_feasible_contract(rng, pop)
    return c if rng.random() < 0.5 else perturb_contract(rng, pop, c)


def random_chain_contract(rng: np.random.Generator, pop: HeteroPopulation) -> HeteroContract:
    """Chain-monotone random prices with the closed-form chain fees."""
    K, L = pop.counts.shape
    vecs = critical_vectors(K, L)
    m = vecs[int(rng.integers(len(vecs)))]
    chain = PriceChain.from_critical(m, K)
    p0 = float(rng.uniform(0.0, pop.price_cap))
    prices = chain.scatter(_sorted_prices(rng, len(chain.order), pop.price_cap), (K, L))
    fees = hetero_optimal_fees(pop, m, prices, p0)
    return HeteroContract.from_arrays(prices, fees, p0, chain.mask((K, L)))


def perturb_hetero_contract(rng: np.random.Generator, pop: HeteroPopulation,
                            c: HeteroContract) -> HeteroContract:
    K, L = c.shape
    prices, fees = c.prices.copy(), c.fees.copy()
    mask = ~c.linus_mask
    bills = c.bill_cells()
    scale = max(1e-3, float(np.abs(fees).max()) if bills else 1.0)
    kind = int(rng.integers(5))
    if bills and kind == 0:
        k, l = bills[int(rng.integers(len(bills)))]
        fees[k, l] += rng.normal() * 0.2 * scale
    elif bills and kind == 1:
        k, l = bills[int(rng.integers(len(bills)))]
        prices[k, l] = rng.uniform(0.001, 1.0) * pop.price_cap
    elif len(bills) >= 2 and kind == 2:
        a, b = rng.choice(len(bills), 2, replace=False)
        (i, j), (k, l) = bills[a], bills[b]
        prices[i, j], prices[k, l] = prices[k, l], prices[i, j]
    elif bills and kind == 3:
        k, l = bills[int(rng.integers(len(bills)))]
        mask[k, l] = False
    else:
        k, l = int(rng.integers(K)), int(rng.integers(L))
        mask[k, l] = True
        prices[k, l] = rng.uniform(0.001, 1.0) * pop.price_cap
        fees[k, l] = rng.normal() * scale
    return HeteroContract.from_arrays(prices, fees, c.linus_price, mask)


def random_hetero_contract(rng: np.random.Generator, pop: HeteroPopulation) -> HeteroContract:
    c = random_chain_contract(rng, pop)
    return c if rng.random() < 0.5 else perturb_hetero_contract(rng, pop, c)
