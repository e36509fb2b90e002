import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wificontract.feasibility import check_ic_ir, structural_lemmas_audit
from wificontract.hetero_market import (
    HeteroContract,
    HeteroPopulation,
    hetero_payoffs,
    hetero_stats,
)
from wificontract.hetero_solver import (
    PriceChain,
    hetero_build_objective,
    hetero_optimal_fees,
    hetero_solve,
    hetero_solve_given_m,
)
from wificontract.oracle import GridSpec, critical_vectors, hetero_grid_search
from wificontract.sampling import random_hetero_population, random_population
from wificontract.solver import build_objective, optimal_fees, solve


def _pop(K, L, seed=0):
    return random_hetero_population(np.random.default_rng(seed), K, L)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_single_level_fees_match(seed):
    rng = np.random.default_rng(seed)
    pop = random_population(rng)
    hp = HeteroPopulation.from_population(pop)
    m = int(rng.integers(1, pop.n_types + 2))
    p0 = float(rng.uniform(0, pop.price_cap))
    prices = np.sort(rng.uniform(0, pop.price_cap, pop.n_types - m + 1))
    full = np.concatenate([np.zeros(m - 1), prices])[:, None]
    got = hetero_optimal_fees(hp, (m,), full, p0)[m - 1:, 0]
    assert np.allclose(got, optimal_fees(pop, m, prices, p0), rtol=1e-12, atol=1e-12)


def test_one_type_two_levels():
    pop = HeteroPopulation(np.array([1.5]), np.array([0.25, 0.75]), np.array([[2.0, 3.0]]),
                           1.0, 1.0, 2.0)
    prices = np.array([[0.8, 1.4]])
    fees = hetero_optimal_fees(pop, (1, 1), prices, 2.0)
    c = HeteroContract.from_arrays(prices, fees, 2.0)
    s = hetero_stats(pop, c)
    g = lambda p: float(pop.g(1.5, p))
    assert fees[0, 1] == pytest.approx(fees[0, 0] + s.omega[1] * (g(1.4) - g(0.8)), abs=1e-12)
    assert hetero_payoffs(pop, c)[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_equal_chain_prices_equal_row_fees():
    pop = _pop(2, 3)
    prices = np.full((2, 3), 0.7 * pop.price_cap)
    fees = hetero_optimal_fees(pop, (1, 1, 1), prices, pop.price_cap)
    assert np.all(fees[:, 1:] == fees[:, :1])


def test_anchor_ir_binds():
    rng = np.random.default_rng(2)
    for _ in range(30):
        pop = random_hetero_population(rng, 3, 2)
        vecs = [m for m in critical_vectors(3, 2) if min(m) <= 3]
        m = vecs[int(rng.integers(len(vecs)))]
        chain = PriceChain.from_critical(m, 3)
        prices = chain.scatter(np.sort(rng.uniform(0.01, 1, len(chain.order))) * pop.price_cap,
                               (3, 2))
        fees = hetero_optimal_fees(pop, m, prices, pop.price_cap)
        c = HeteroContract.from_arrays(prices, fees, pop.price_cap, chain.mask((3, 2)))
        assert hetero_payoffs(pop, c)[chain.anchor] == pytest.approx(0.0, abs=1e-9)


def test_rejects_bad_vectors():
    pop = _pop(2, 2)
    with pytest.raises(ValueError):
        hetero_optimal_fees(pop, (1, 2), np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        hetero_build_objective(pop, (3, 3), 1.0)


def test_single_level_objective_matches():
    rng = np.random.default_rng(9)
    pop = random_population(rng, n_types=4)
    hp = HeteroPopulation.from_population(pop)
    for m in range(1, 4):
        a, b = build_objective(pop, m, pop.price_cap), hetero_build_objective(hp, (m,), pop.price_cap)
        p = np.linspace(0, pop.price_cap, 9)
        for t in range(a.size):
            assert np.allclose(a.term_value(t, p), b.term_value(t, p), rtol=1e-12, atol=1e-12)


def test_corner_cell_objective():
    pop = _pop(2, 2, seed=4)
    obj = hetero_build_objective(pop, (3, 2), pop.price_cap)
    assert obj.labels == ((1, 1),)
    c = HeteroContract.from_arrays(np.array([[0, 0], [0, 1.0]]), np.array([[0, 0], [0, 1.0]]),
                                   pop.price_cap, np.array([[False, False], [False, True]]))
    omega_L = hetero_stats(pop, c).omega[1]
    p = np.linspace(0, pop.price_cap, 5)
    expected = omega_L * pop.counts[1, 1] * pop.g(pop.qualities[1], p)
    assert np.allclose(obj.term_value(0, p), expected, rtol=1e-12, atol=1e-12)


def test_toy_successor_crosses_rows():
    pop = _pop(4, 5)
    obj = hetero_build_objective(pop, (5, 4, 3, 1, 1), pop.price_cap)
    t = obj.labels.index((1, 4))
    assert obj.labels[t + 1] == (2, 2)
    assert obj.next_theta[t] == pop.qualities[2]


def test_candidate_counts():
    assert len(critical_vectors(20, 2)) == 231
    assert len(critical_vectors(5, 1)) == 6
    with pytest.raises(ValueError, match="exceed"):
        hetero_solve(_pop(3, 3), max_vectors=10)
    rep = hetero_solve(_pop(3, 2))
    assert len(rep.candidate_profits) == 10
    assert (4, 4) in dict(rep.candidate_profits)


def test_all_linus_vector_profit():
    pop = _pop(2, 2, seed=6)
    rep = hetero_solve_given_m(pop, (3, 3))
    a = pop.alien_ratio
    expected = float((pop.counts * a * pop.g(pop.qualities[:, None], pop.price_cap)).sum())
    # Linus APs also host roaming Bills, none here
    assert rep.profit == pytest.approx(expected, rel=1e-12, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_single_level_solve_matches(seed):
    rng = np.random.default_rng(seed)
    pop = random_population(rng)
    a = solve(pop, max_iterations=5000)
    b = hetero_solve(HeteroPopulation.from_population(pop), max_iterations=5000)
    assert b.profit == pytest.approx(a.profit, abs=1e-9)
    assert b.m_star == (a.m_star,)


def test_two_by_two_against_grid():
    rng = np.random.default_rng(12)
    for _ in range(5):
        pop = random_hetero_population(rng, 2, 2)
        rep = hetero_solve(pop)
        oracle = hetero_grid_search(pop, GridSpec(21))
        assert rep.profit >= oracle.profit - 1e-6
        assert check_ic_ir(pop, rep.contract).is_feasible


def test_returned_contracts_respect_orderings():
    rng = np.random.default_rng(13)
    for _ in range(10):
        pop = random_hetero_population(rng, 3, 2)
        rep = hetero_solve(pop)
        m = rep.m_star
        assert all(m[l] >= m[l + 1] for l in range(len(m) - 1))
        audit = structural_lemmas_audit(pop, rep.contract)
        assert all(v.holds for v in audit), audit
