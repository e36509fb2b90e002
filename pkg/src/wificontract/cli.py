"""Command-line experiment harness.

``wificontract solve CONFIG`` runs every sweep point of a scenario and writes
two CSV files into ``--out`` (default: current directory):

``<name>_summary.csv``
    one row per sweep point. Columns: scenario, sweep_param, sweep_value,
    m_star (``m_vector`` for heterogeneous runs, levels separated by spaces),
    p0, profit, profit_per_user, dual_ub, dynamic_lb, decomposition_gap,
    iterations, wall_ms, then ``oracle_profit`` when ``--oracle`` is given,
    then ``p_<k>``, ``delta_<k>`` and ``payoff_<k>`` for every type (cells are
    named ``<k>_<l>`` in heterogeneous runs).
``<name>_contracts.csv``
    one row per type and sweep point: scenario, sweep_value, type, level,
    role, price, fee, payoff.

Numbers use 12 significant digits. ``wall_ms`` stays empty unless
``--timing`` is passed, so reruns produce identical bytes. Files are written
to a temporary name and renamed, so a failed run never leaves partial output.

Exit codes: 0 success, 2 configuration error, 3 solver error. The
``WIFICONTRACT_TOLERANCE`` environment variable overrides the scalar search
tolerance (default 1e-8).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .feasibility import check_theorem1, check_theorem2_hetero
from .hetero_solver import hetero_solve
from .oracle import GridSpec, grid_search_contract, hetero_grid_search
from .scalar import TOLERANCE
from .scenario import ConfigError, Scenario, load_scenario
from .solver import solve

TOLERANCE_ENV = "WIFICONTRACT_TOLERANCE"

SUMMARY_COLUMNS = ("scenario", "sweep_param", "sweep_value", "m_star", "p0", "profit",
                   "profit_per_user", "dual_ub", "dynamic_lb", "decomposition_gap",
                   "iterations", "wall_ms")
CONTRACT_COLUMNS = ("scenario", "sweep_value", "type", "level", "role", "price", "fee",
                    "payoff")


class SolverFailure(RuntimeError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def env_tolerance() -> float:
    raw = os.environ.get(TOLERANCE_ENV)
    if raw is None:
        return TOLERANCE
    try:
        tol = float(raw)
    except ValueError:
        tol = float("nan")
    if not tol > 0 or tol == float("inf"):
        raise ConfigError(f"{TOLERANCE_ENV} must be a positive number, got {raw!r}")
    return tol


def _run_point(args) -> dict:
    """Solve one sweep point; returns plain data for the CSV writers."""
    value, sc, hetero, oracle, tolerance = args
    kw = dict(max_iterations=sc.max_iterations, tolerance=tolerance)
    start = time.perf_counter()
    if hetero:
        pop = sc.hetero_population()
        rep = hetero_solve(pop, sc.epsilon, **kw)
        check = check_theorem2_hetero(pop, rep.contract)
        K, L = pop.counts.shape
        labels = [(k + 1, l + 1) for k in range(K) for l in range(L)]
        prices = rep.contract.prices.ravel()
        fees = rep.contract.fees.ravel()
        pays = rep.per_type_payoffs.ravel()
        roles = ["linus" if x else "bill" for x in rep.contract.linus_mask.ravel()]
        m_label = " ".join(str(x) for x in rep.m_star)
        n_users = float(pop.counts.sum())
    else:
        pop = sc.population()
        rep = solve(pop, sc.epsilon, **kw)
        check = check_theorem1(pop, rep.contract)
        labels = [(k + 1, None) for k in range(pop.n_types)]
        prices, fees = rep.contract.prices, rep.contract.fees
        pays = rep.per_type_payoffs
        roles = ["linus" if x else "bill" for x in rep.contract.linus_mask]
        m_label = str(rep.m_star)
        n_users = float(pop.counts.sum())
    wall_ms = (time.perf_counter() - start) * 1e3
    if not check.is_feasible:
        raise SolverFailure(f"contract at sweep value {value} failed the feasibility "
                            f"re-check: {sorted(check.failed_constraints())}")
    oracle_profit = None
    if oracle:
        grid = GridSpec(sc.grid_points)
        res = hetero_grid_search(pop, grid) if hetero else grid_search_contract(pop, grid)
        oracle_profit = res.profit
    return dict(value=value, m=m_label, p0=rep.contract.linus_price, profit=rep.profit,
                per_user=rep.profit / n_users, dual_ub=rep.dual_upper_bound,
                dynamic_lb=rep.dynamic_lower_bound, gap=rep.decomposition_gap,
                iterations=rep.iterations, wall_ms=wall_ms, oracle=oracle_profit,
                labels=labels, prices=list(prices), fees=list(fees), pays=list(pays),
                roles=roles)


def _label(k, l) -> str:
    return str(k) if l is None else f"{k}_{l}"


def render(sc: Scenario, rows: list[dict], hetero: bool, oracle: bool,
           timing: bool) -> tuple[str, str]:
    """Summary and contract CSV text for the computed sweep points."""
    labels = rows[0]["labels"] if rows else []
    header = list(SUMMARY_COLUMNS)
    if hetero:
        header[3] = "m_vector"
    if oracle:
        header.append("oracle_profit")
    for prefix in ("p", "delta", "payoff"):
        header += [f"{prefix}_{_label(*t)}" for t in labels]
    summary, contracts = io.StringIO(), io.StringIO()
    ws = csv.writer(summary, lineterminator="\n")
    wc = csv.writer(contracts, lineterminator="\n")
    ws.writerow(header)
    wc.writerow(CONTRACT_COLUMNS)
    for r in rows:
        line = [sc.name, sc.sweep_parameter or "", fmt(r["value"]), r["m"], fmt(r["p0"]),
                fmt(r["profit"]), fmt(r["per_user"]), fmt(r["dual_ub"]), fmt(r["dynamic_lb"]),
                fmt(r["gap"]), fmt(int(r["iterations"])),
                fmt(r["wall_ms"]) if timing else ""]
        if oracle:
            line.append(fmt(r["oracle"]))
        line += [fmt(x) for x in r["prices"]] + [fmt(x) for x in r["fees"]]
        line += [fmt(x) for x in r["pays"]]
        ws.writerow(line)
        for (k, l), role, p, d, u in zip(r["labels"], r["roles"], r["prices"], r["fees"],
                                         r["pays"]):
            wc.writerow([sc.name, fmt(r["value"]), k, "" if l is None else l, role,
                         fmt(p), fmt(d), fmt(u)])
    return summary.getvalue(), contracts.getvalue()


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_scenario(sc: Scenario, out: Path, *, jobs: int = 1, hetero: bool = False,
                 oracle: bool = False, timing: bool = False,
                 tolerance: float = TOLERANCE) -> tuple[Path, Path]:
    hetero = hetero or sc.is_hetero
    tasks = [(v, point, hetero, oracle, tolerance) for v, point in sc.points()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]
    summary, contracts = render(sc, rows, hetero, oracle, timing)
    out.mkdir(parents=True, exist_ok=True)
    paths = out / f"{sc.name}_summary.csv", out / f"{sc.name}_contracts.csv"
    atomic_write(paths[0], summary)
    atomic_write(paths[1], contracts)
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wificontract",
                                     description="Optimal Wi-Fi community contracts.")
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve every sweep point of a scenario")
    s.add_argument("config")
    s.add_argument("--out", default=".", help="output directory (default: .)")
    s.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    s.add_argument("--oracle", action="store_true", help="also run the grid oracle")
    s.add_argument("--hetero", action="store_true",
                   help="use the heterogeneous-mobility solver")
    s.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    v = sub.add_parser("validate", help="check a scenario and print the effective config")
    v.add_argument("config")
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        sc = load_scenario(args.config)
        if args.command == "validate":
            sys.stdout.write(sc.normalized())
            return 0
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        tolerance = env_tolerance()
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run_scenario(sc, Path(args.out), jobs=args.jobs, hetero=args.hetero,
                             oracle=args.oracle, timing=args.timing, tolerance=tolerance)
    except Exception as exc:  # any failure inside the numerical stack
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
