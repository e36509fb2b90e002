import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wificontract.hetero_market import (
    HeteroContract,
    HeteroPopulation,
    hetero_operator_profit,
    hetero_payoffs,
    hetero_stats,
)
from wificontract.market import market_stats, operator_profit, payoffs, revenue_g
from wificontract.sampling import random_contract, random_population


def test_two_level_omega():
    pop = HeteroPopulation(np.array([1.0]), np.array([0.25, 0.75]), np.array([[2.0, 2.0]]),
                           0.0, 1.0, 2.0)
    c = HeteroContract.from_arrays(np.array([[1.0, 1.5]]), np.array([[0.1, 0.2]]), 2.0)
    s = hetero_stats(pop, c)
    assert s.omega[0] == pytest.approx(0.3125, abs=1e-12)
    assert s.mu == pytest.approx(0.5, abs=1e-12)


def test_all_linus_omega():
    pop = HeteroPopulation(np.array([1.0, 2.0]), np.array([0.2, 0.6]),
                           np.array([[3.0, 1.0], [2.0, 4.0]]), 5.0, 1.0, 3.0)
    c = HeteroContract.from_arrays(np.zeros((2, 2)), np.zeros((2, 2)), 3.0,
                                   np.zeros((2, 2), dtype=bool))
    s = hetero_stats(pop, c)
    assert np.allclose(s.omega, 0.5 - (1 - pop.etas) / 10, atol=1e-12)
    expected = sum(pop.counts[k, l] * 0.5 * revenue_g(pop.qualities[k], 3.0)
                   for k in range(2) for l in range(2))
    assert hetero_operator_profit(pop, c) == pytest.approx(expected, abs=1e-12)


def test_single_bill_cell_profit():
    pop = HeteroPopulation(np.array([1.0, 2.0]), np.array([0.2, 0.6]),
                           np.array([[3.0, 1.0], [2.0, 4.0]]), 5.0, 1.0, 3.0)
    mask = np.array([[False, False], [False, True]])
    prices = np.array([[0.0, 0.0], [0.0, 2.0]])
    fees = np.array([[0.0, 0.0], [0.0, 0.7]])
    c = HeteroContract.from_arrays(prices, fees, 3.0, mask)
    w = (1 - pop.etas) / 10
    mu = w[1] * 4 + 0.5
    linus = sum(pop.counts[k, l] * revenue_g(pop.qualities[k], 3.0)
                for k, l in [(0, 0), (0, 1), (1, 0)])
    assert hetero_operator_profit(pop, c) == pytest.approx(mu * linus + 4 * 0.7, abs=1e-12)


def test_critical_types():
    mask = np.array([[False, True], [True, True]])
    c = HeteroContract.from_arrays(np.ones((2, 2)), np.ones((2, 2)), 1.0, mask)
    assert c.critical_types == (2, 1)
    assert c.bill_cells() == [(0, 1), (1, 0), (1, 1)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_single_level_matches_homogeneous(seed):
    rng = np.random.default_rng(seed)
    pop = random_population(rng)
    c = random_contract(rng, pop)
    hp, hc = HeteroPopulation.from_population(pop), HeteroContract.from_contract(c)
    s, hs = market_stats(pop, c), hetero_stats(hp, hc)
    assert hs.omega[0] == pytest.approx(s.omega, rel=1e-12, abs=1e-12)
    assert hs.mu == pytest.approx(s.mu, rel=1e-12, abs=1e-12)
    assert np.allclose(hetero_payoffs(hp, hc)[:, 0], payoffs(pop, c), rtol=1e-12, atol=1e-12)
    assert hetero_operator_profit(hp, hc) == pytest.approx(operator_profit(pop, c),
                                                           rel=1e-12, abs=1e-12)
