import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wificontract.feasibility import (
    InfeasibleContractError,
    chain_links,
    check_ic_ir,
    check_theorem1,
    check_theorem2_hetero,
    structural_lemmas_audit,
)
from wificontract.hetero_market import HeteroContract, HeteroPopulation
from wificontract.market import Contract
from wificontract.oracle import best_response_check, chain_cells
from wificontract.sampling import (
    random_chain_contract,
    random_contract,
    random_feasible_contract,
    random_hetero_contract,
    random_population,
    random_small_hetero,
)


def test_e1_feasible_with_binding_constraints(e1, e1_contract):
    r = check_ic_ir(e1, e1_contract)
    assert r.is_feasible and r.violated == () and r.critical_type == 1
    binding = {(v.constraint, v.types) for v in r.binding}
    assert ("IR", (0,)) in binding
    assert ("IC", (1, 0)) in binding


def test_e1_raised_fee_breaks_adjacent_ic(e1):
    c = Contract.from_arrays([1.0, 2.0], [0.125, 5 / 12 + 0.01], 2.0)
    r = check_ic_ir(e1, c)
    assert not r.is_feasible
    assert ("IC", (1, 0)) in {(v.constraint, v.types) for v in r.violated}


def test_all_linus_feasible(e1):
    c = Contract.all_linus(2, 1.3)
    assert check_ic_ir(e1, c).is_feasible
    assert check_theorem1(e1, c).is_feasible
    assert check_ic_ir(e1, c).critical_type == 3


def test_theorem1_on_e1(e1, e1_contract):
    assert check_theorem1(e1, e1_contract).is_feasible


def test_theorem1_price_order(e1):
    c = Contract.from_arrays([1.5, 1.0], [0.1, 0.1], 2.0)
    assert "price-order" in check_theorem1(e1, c).failed_constraints()


def test_theorem1_partition(e1):
    c = Contract.from_arrays([1.0, 0.0], [0.1, 0.0], 2.0)
    r = check_theorem1(e1, c)
    assert "partition" in r.failed_constraints()
    assert r.critical_type is None


def test_hetero_single_level_matches_theorem1():
    rng = np.random.default_rng(11)
    for _ in range(200):
        pop = random_population(rng)
        c = random_contract(rng, pop)
        hp, hc = HeteroPopulation.from_population(pop), HeteroContract.from_contract(c)
        assert check_theorem2_hetero(hp, hc).is_feasible == check_theorem1(pop, c).is_feasible


def test_toy_chain_order():
    m = (5, 4, 3, 1, 1)
    cells = [(k + 1, l + 1) for k, l in chain_cells(m, 4)]
    assert cells == [(1, 4), (1, 5), (2, 4), (2, 5), (3, 3), (3, 4), (3, 5),
                     (4, 2), (4, 3), (4, 4), (4, 5)]
    links = chain_links(m, 4)
    # last cell of row 2 leads to the first Bill of row 3, which sits at level 3
    assert ((1, 4), (2, 2)) in links
    for lo, hi in zip(chain_cells(m, 4), chain_cells(m, 4)[1:]):
        assert (lo, hi) in links


def test_toy_chain_violation_detected():
    m = (5, 4, 3, 1, 1)
    K, L = 4, 5
    pop = HeteroPopulation(np.arange(1.0, 5.0), np.linspace(0.1, 0.9, 5), np.ones((K, L)),
                           2.0, 1.0, 5.0)
    mask = np.zeros((K, L), dtype=bool)
    cells = chain_cells(m, K)
    prices = np.zeros((K, L))
    for t, (k, l) in enumerate(cells):
        mask[k, l] = True
        prices[k, l] = 0.2 + 0.3 * t
    prices[0, 4], prices[1, 3] = prices[1, 3], prices[0, 4]  # p_{1,5} > p_{2,4}
    c = HeteroContract.from_arrays(prices, np.zeros((K, L)), 5.0, mask)
    bad = [v.types for v in check_theorem2_hetero(pop, c).violated if v.constraint == "price-chain"]
    assert ((0, 4), (1, 3)) in bad


def test_increasing_critical_vector_flagged():
    pop = HeteroPopulation(np.array([1.0, 2.0]), np.array([0.3, 0.7]), np.ones((2, 2)),
                           1.0, 1.0, 3.0)
    mask = np.array([[True, False], [True, True]])  # m = (1, 2)
    c = HeteroContract.from_arrays(np.where(mask, 1.0, 0.0), np.where(mask, 0.1, 0.0), 3.0, mask)
    assert c.critical_types == (1, 2)
    assert "critical-order" in check_theorem2_hetero(pop, c).failed_constraints()


def test_audit_on_e1(e1, e1_contract):
    assert all(v.holds for v in structural_lemmas_audit(e1, e1_contract))


def test_audit_refuses_equal_prices_unequal_fees(e1):
    c = Contract.from_arrays([1.0, 1.0], [0.1, 0.2], 2.0)
    with pytest.raises(InfeasibleContractError):
        structural_lemmas_audit(e1, c)


def test_audit_holds_on_constructed_contracts():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(300):
        pop = random_population(rng)
        c = random_feasible_contract(rng, pop)
        if check_ic_ir(pop, c).is_feasible:
            assert all(v.holds for v in structural_lemmas_audit(pop, c)), c
            checked += 1
    assert checked > 100


def test_cross_row_price_order_is_not_necessary():
    # IC/IR-feasible 2x2 contract where the higher-quality, lower-mobility
    # cell (2,1) is priced below the lower-quality, higher-mobility cell
    # (1,2); the structural check demands the opposite order
    pop = HeteroPopulation(np.array([14.36, 15.4]), np.array([0.154, 0.871]),
                           np.array([[2.0, 33.0], [9.0, 15.0]]), 0.0, 1.0, 9.3245)
    prices = np.array([[0.3277, 4.3188], [2.3929, 4.9437]])
    fees = np.array([[-2.5696, -1.8146], [-2.1389, -1.7201]])
    c = HeteroContract.from_arrays(prices, fees, 4.2973, np.ones((2, 2), dtype=bool))
    assert check_ic_ir(pop, c).is_feasible
    assert best_response_check(pop, c).ok
    assert check_theorem2_hetero(pop, c).failed_constraints() == {"price-chain"}
    audit = {v.name: v.holds for v in structural_lemmas_audit(pop, c)}
    assert audit["price-cross-order"] is False


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_theorem1_iff(seed):
    rng = np.random.default_rng(seed)
    pop = random_population(rng)
    c = random_contract(rng, pop)
    assert check_ic_ir(pop, c).is_feasible == check_theorem1(pop, c).is_feasible


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_theorem2_iff_on_sampled_contracts(seed):
    rng = np.random.default_rng(seed)
    pop = random_small_hetero(rng)
    c = random_hetero_contract(rng, pop)
    assert check_ic_ir(pop, c).is_feasible == check_theorem2_hetero(pop, c).is_feasible


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_verdict_is_deterministic(seed):
    rng = np.random.default_rng(seed)
    pop = random_small_hetero(rng)
    c = random_chain_contract(rng, pop)
    assert check_theorem2_hetero(pop, c) == check_theorem2_hetero(pop, c)
    assert check_ic_ir(pop, c) == check_ic_ir(pop, c)
