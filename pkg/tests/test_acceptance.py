"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed as they are produced and again in the terminal summary.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from wificontract import cli
from wificontract.feasibility import check_ic_ir, check_theorem1, check_theorem2_hetero
from wificontract.hetero_market import HeteroPopulation
from wificontract.hetero_solver import hetero_solve
from wificontract.market import Contract, Population, market_stats
from wificontract.oracle import GridSpec, best_response_check, grid_search_contract
from wificontract.sampling import (
    perturb_contract,
    random_feasible_contract,
    random_hetero_contract,
    random_population,
    random_small_hetero,
)
from wificontract.scenario import distribution_counts, load_scenario
from wificontract.solver import optimal_fees, solve, solve_given_m

ROOT = Path(__file__).resolve().parents[1]


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def reference_population(n_aliens: float = 10.0, counts=None) -> Population:
    counts = np.full(20, 10.0) if counts is None else np.asarray(counts, dtype=float)
    return Population(np.arange(1.0, 21.0), counts, 0.5, n_aliens, 1.0, 5.0)


def test_criterion_01_theorem1_iff():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    mismatches = feasible = 0
    for i in range(500):
        pop = random_population(rng, max_types=4)
        c = random_feasible_contract(rng, pop)
        if i % 2:
            c = perturb_contract(rng, pop, c)
        a = check_ic_ir(pop, c).is_feasible
        feasible += a
        mismatches += a != check_theorem1(pop, c).is_feasible
    elapsed = time.perf_counter() - start
    record(1, mismatches == 0 and elapsed < 30,
           f"{mismatches} disagreements on 500 contracts ({feasible} feasible), {elapsed:.1f} s")


def test_criterion_02_fee_exactness():
    rng = np.random.default_rng(102)
    worst = 0.0
    broken = trials = 0
    for _ in range(1000):
        pop = random_population(rng, max_types=4)
        m = int(rng.integers(1, pop.n_types + 1))
        p0 = float(rng.uniform(0, pop.price_cap))
        prices = np.sort(rng.uniform(0.001, 1.0, pop.n_types - m + 1) * pop.price_cap)
        fees = optimal_fees(pop, m, prices, p0)
        c = Contract.threshold(pop.n_types, m, prices, fees, p0)
        omega = market_stats(pop, c).omega
        theta = pop.qualities[m - 1:]
        tele = np.diff(fees) - omega * (pop.g(theta[1:], prices[1:]) - pop.g(theta[1:], prices[:-1]))
        slack = {(v.constraint, v.types): v.slack for v in check_ic_ir(pop, c).binding}
        binding = [slack.get(("IR", (m - 1,)), np.inf)]
        binding += [slack.get(("IC", (k, k - 1)), np.inf) for k in range(m, pop.n_types)]
        worst = max(worst, float(np.max(np.abs(tele), initial=0.0)), max(abs(b) for b in binding))
        for t in range(fees.size):
            bumped = fees.copy()
            bumped[t] += 1e-3
            trials += 1
            broken += not check_theorem1(
                pop, Contract.threshold(pop.n_types, m, prices, bumped, p0)).is_feasible
    record(2, worst <= 1e-9 and broken == trials,
           f"max identity/binding residual {worst:.2e}; {broken}/{trials} perturbations infeasible")


def test_criterion_03_oracle_sandwich():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    bad = []
    for i in range(100):
        pop = random_population(rng, max_types=3)
        grid = grid_search_contract(pop, GridSpec(101)).profit
        got = solve(pop).profit
        if not (got >= grid - 1e-9 and got <= grid / (1 - 0.05)):
            bad.append((i, got, grid))
    elapsed = time.perf_counter() - start
    record(3, not bad and elapsed < 300,
           f"{len(bad)} of 100 instances outside the sandwich, {elapsed:.1f} s")


def test_criterion_04_bounds_and_convergence():
    pop = reference_population()
    bad, unconverged, iters = [], [], []
    for m in range(1, pop.n_types + 2):
        r = solve_given_m(pop, m)
        iters.append(r.iterations)
        if not (r.dynamic_lower_bound <= r.decomposed_profit + 1e-9
                and r.decomposed_profit <= r.dual_upper_bound + 1e-9):
            bad.append(m)
        if not r.converged or r.iterations > 100_000:
            unconverged.append(m)
    rng = np.random.default_rng(104)
    for _ in range(30):
        small = random_population(rng)
        for m in range(1, small.n_types + 2):
            r = solve_given_m(small, m)
            if not (r.dynamic_lower_bound <= r.decomposed_profit + 1e-9
                    and r.decomposed_profit <= r.dual_upper_bound + 1e-9):
                bad.append((m, small))
    record(4, not bad and not unconverged,
           f"bound violations {len(bad)}, unconverged m {unconverged}, "
           f"max dual iterations {max(iters)}")


def test_criterion_05_full_scale_run():
    pop = reference_population()
    start = time.perf_counter()
    r = solve(pop)
    elapsed = time.perf_counter() - start
    feasible = check_theorem1(pop, r.contract).is_feasible
    ok = elapsed < 10 and feasible and r.contract.linus_price == 5.0 and len(r.candidate_profits) == 21
    record(5, ok, f"m*={r.m_star}, profit={r.profit:.6g}, {elapsed:.2f} s, feasible={feasible}, "
                  f"p0={r.contract.linus_price}")


def test_criterion_06_critical_type_grows_with_aliens():
    results = {}
    for case in ("low-dominant", "medium-dominant", "high-dominant"):
        counts = distribution_counts(case, 20, 200)
        results[case] = [solve(reference_population(na, counts)).m_star
                         for na in (0, 200, 2000, 20000)]
    ok = all(all(a <= b for a, b in zip(ms, ms[1:])) for ms in results.values())
    record(6, ok, "; ".join(f"{k}: {v}" for k, v in results.items()))


def test_criterion_07_hetero_ordering():
    vectors, slowest = [], 0.0
    for eta1 in (0.2, 0.4, 0.6, 0.7, 0.75):
        pop = HeteroPopulation(np.arange(1.0, 21.0), np.array([eta1, 0.8]),
                               np.full((20, 2), 100.0), 2400.0, 1.0, 10.0)
        start = time.perf_counter()
        r = hetero_solve(pop)
        slowest = max(slowest, time.perf_counter() - start)
        vectors.append(r.m_star)
    ok = all(m[0] >= m[1] for m in vectors) and slowest < 120
    record(7, ok, f"m vectors {vectors}, slowest point {slowest:.1f} s")


def test_criterion_08_single_level_equivalence():
    rng = np.random.default_rng(108)
    worst = 0.0
    for _ in range(50):
        pop = random_population(rng)
        a = solve(pop).profit
        b = hetero_solve(HeteroPopulation.from_population(pop)).profit
        worst = max(worst, abs(a - b))
    record(8, worst <= 1e-9, f"max profit difference {worst:.2e} on 50 instances")


def test_criterion_09_theorem2_iff():
    rng = np.random.default_rng(109)
    mismatches = feasible = 0
    for _ in range(200):
        pop = random_small_hetero(rng, max_cells=8)
        c = random_hetero_contract(rng, pop)
        a = check_ic_ir(pop, c).is_feasible
        feasible += a
        mismatches += a != check_theorem2_hetero(pop, c).is_feasible
    record(9, mismatches == 0,
           f"{mismatches} disagreements on 200 contracts ({feasible} feasible)")


def test_criterion_10_best_response():
    rng = np.random.default_rng(110)
    failures = 0
    for i in range(200):
        if i % 2:
            pop = random_small_hetero(rng, max_cells=8)
            c = hetero_solve(pop).contract
        else:
            pop = random_population(rng)
            c = solve(pop).contract
        failures += not best_response_check(pop, c)
    record(10, failures == 0, f"{failures} of 200 solver outputs not best responses")


def test_criterion_11_determinism(tmp_path):
    cfg = ROOT / "scenarios" / "fig5_critical_type.cfg"
    outs = []
    for run in ("a", "b"):
        assert cli.main(["solve", str(cfg), "--out", str(tmp_path / run)]) == 0
        outs.append(tmp_path / run / "fig5_critical_type_summary.csv")
    same = outs[0].read_bytes() == outs[1].read_bytes()
    name = load_scenario(cfg).name
    record(11, same, f"{name} summary CSV byte-identical across two runs: {same}")
