from math import comb

import numpy as np
import pytest

from wificontract.feasibility import check_ic_ir
from wificontract.hetero_market import HeteroPopulation
from wificontract.market import Contract, Population, operator_profit
from wificontract.oracle import (
    GridSpec,
    best_response_check,
    grid_search_contract,
    hetero_grid_search,
    nondecreasing_tuples,
)
from wificontract.sampling import (
    random_contract,
    random_hetero_contract,
    random_hetero_population,
    random_population,
    random_small_hetero,
)
from wificontract.solver import optimal_fees, solve


def test_grid_spec():
    assert GridSpec(3).values(2.0).tolist() == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        GridSpec(1)


def test_tuples_are_complete_and_sorted():
    t = nondecreasing_tuples(5, 3)
    assert len(t) == comb(7, 3)
    assert np.all(np.diff(t, axis=1) >= 0)
    assert [tuple(r) for r in t] == sorted(tuple(r) for r in t)


def test_single_type_three_point_grid():
    pop = Population(np.array([2.0]), np.array([3.0]), 0.3, 4.0, 1.0, 2.0)
    candidates = [operator_profit(pop, Contract.all_linus(1, 2.0))]
    for p in (0.0, 1.0, 2.0):
        d = optimal_fees(pop, 1, [p], 2.0)
        if p == 0.0 and abs(d[0]) <= 1e-9:
            continue
        candidates.append(operator_profit(pop, Contract.threshold(1, 1, [p], d, 2.0)))
    res = grid_search_contract(pop, GridSpec(3))
    assert res.profit == pytest.approx(max(candidates), abs=1e-12)


def test_e1_grid_against_solver(e1):
    contract, profit = grid_search_contract(e1, GridSpec(41))
    best = solve(e1).profit
    assert profit <= best + 1e-9
    assert profit >= 0.95 * best


def test_refining_grid_never_hurts():
    rng = np.random.default_rng(1)
    for _ in range(10):
        pop = random_population(rng, max_types=3)
        assert grid_search_contract(pop, GridSpec(41)).profit >= \
            grid_search_contract(pop, GridSpec(11)).profit - 1e-12


def test_size_guards():
    pop = random_population(np.random.default_rng(0), n_types=5)
    with pytest.raises(ValueError):
        grid_search_contract(pop, GridSpec(3))
    with pytest.raises(ValueError):
        hetero_grid_search(random_hetero_population(np.random.default_rng(0), 4, 2))


def test_hetero_single_level_matches():
    rng = np.random.default_rng(2)
    for _ in range(5):
        pop = random_population(rng, max_types=3)
        a = grid_search_contract(pop, GridSpec(21))
        b = hetero_grid_search(HeteroPopulation.from_population(pop), GridSpec(21))
        assert b.profit == pytest.approx(a.profit, abs=1e-9)


def test_hetero_trace_includes_all_linus():
    pop = random_hetero_population(np.random.default_rng(3), 2, 2)
    trace = dict(hetero_grid_search(pop, GridSpec(11)).trace)
    assert np.isfinite(trace[(3, 3)])


def test_oracle_winners_are_feasible():
    rng = np.random.default_rng(4)
    for _ in range(20):
        pop = random_population(rng, max_types=3)
        assert check_ic_ir(pop, grid_search_contract(pop, GridSpec(21)).contract).is_feasible


def test_best_response_on_e1(e1, e1_contract):
    assert best_response_check(e1, solve(e1).contract)
    assert best_response_check(e1, e1_contract)
    lowered = Contract.from_arrays([1.0, 2.0], [0.125 - 0.5, 5 / 12], 2.0)
    verdict = best_response_check(e1, lowered)
    assert not verdict
    assert (1, 0) in [(t, target) for t, target, _ in verdict.deviations]
    assert best_response_check(e1, Contract.all_linus(2, 2.0))


@pytest.mark.parametrize("seed", [0, 1])
def test_best_response_agrees_with_direct_check(seed):
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        pop = random_population(rng)
        c = random_contract(rng, pop)
        direct = check_ic_ir(pop, c)
        if "price-range" in direct.failed_constraints():
            continue
        assert bool(best_response_check(pop, c)) == direct.is_feasible


def test_hetero_best_response_agrees_with_direct_check():
    rng = np.random.default_rng(7)
    for _ in range(300):
        pop = random_small_hetero(rng)
        c = random_hetero_contract(rng, pop)
        direct = check_ic_ir(pop, c)
        if "price-range" in direct.failed_constraints():
            continue
        assert bool(best_response_check(pop, c)) == direct.is_feasible
