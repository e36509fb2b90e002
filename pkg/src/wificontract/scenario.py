"""Scenario configuration files for the command-line harness.

A scenario is an INI document with these sections (``*`` marks required keys)::

    [scenario]
    name*           identifier used in output file names and the CSV
    [population]
    n_types*        K
    qualities       comma-separated increasing list; default 1, 2, ..., K
    n_apos*         total APO count N
    distribution    uniform | low-dominant | medium-dominant | high-dominant
    counts          explicit comma-separated N_k (overrides distribution)
    eta             mobility of a homogeneous population (default 0.5)
    etas            comma-separated increasing mobility levels (heterogeneous)
    level_shares    share of APOs at each mobility level (default equal)
    n_aliens*       number of Aliens
    price_cap*      p_max
    period          T (default 1)
    [solver]
    epsilon         dual stopping threshold (default 1e-4)
    max_iterations  dual iteration cap (default 100000)
    grid_points     oracle grid resolution G (default 101)
    [sweep]
    parameter       n_aliens | eta_1
    values          comma-separated values

Distribution masses are triangular over the types: ``uniform`` weights every
type equally, ``low-dominant`` weights type ``k`` by ``K + 1 - k``,
``high-dominant`` by ``k`` and ``medium-dominant`` by ``min(k, K + 1 - k)``.
Every type first receives one APO and the remaining ``N - K`` are split in
proportion to the weights by largest-remainder rounding, so counts sum to
``N`` exactly.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .hetero_market import HeteroPopulation
from .market import Population

DISTRIBUTIONS = ("uniform", "low-dominant", "medium-dominant", "high-dominant")
SWEEP_PARAMETERS = ("n_aliens", "eta_1")

_SECTIONS = {
    "scenario": {"name"},
    "population": {"n_types", "qualities", "n_apos", "distribution", "counts", "eta", "etas",
                   "level_shares", "n_aliens", "price_cap", "period"},
    "solver": {"epsilon", "max_iterations", "grid_points"},
    "sweep": {"parameter", "values"},
}
_REQUIRED = {"scenario": ("name",), "population": ("n_types", "n_apos", "n_aliens", "price_cap")}


class ConfigError(ValueError):
    """Validation failure carrying the offending location."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None,
                 line: int | None = None):
        self.section, self.key, self.line = section, key, line
        where = ".".join(x for x in (section, key) if x)
        prefix = f"line {line}: " if line else ""
        super().__init__(f"{prefix}{where + ': ' if where else ''}{message}")


@dataclass(frozen=True)
class Scenario:
    name: str
    qualities: tuple[float, ...]
    counts: tuple[int, ...]
    n_apos: int
    distribution: str
    eta: float
    etas: tuple[float, ...] | None
    level_shares: tuple[float, ...] | None
    n_aliens: float
    price_cap: float
    period: float = 1.0
    epsilon: float = 1e-4
    max_iterations: int = 100_000
    grid_points: int = 101
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()

    @property
    def is_hetero(self) -> bool:
        return self.etas is not None

    def points(self) -> list[tuple[float | None, "Scenario"]]:
        """Scenario at each sweep value (a single unswept point if none)."""
        if self.sweep_parameter is None:
            return [(None, self)]
        out = []
        for v in self.sweep_values:
            if self.sweep_parameter == "n_aliens":
                out.append((v, replace(self, n_aliens=v, sweep_values=())))
            else:
                etas = (v,) + self.etas[1:] if self.etas else None
                out.append((v, replace(self, eta=v, etas=etas, sweep_values=())))
        return out

    def population(self) -> Population:
        return Population(np.array(self.qualities), np.array(self.counts, dtype=float),
                          self.eta, self.n_aliens, self.period, self.price_cap)

    def hetero_population(self) -> HeteroPopulation:
        if self.etas is None:
            return HeteroPopulation.from_population(self.population())
        shares = self.level_shares or (1.0,) * len(self.etas)
        cells = np.outer(self.counts, shares).ravel()
        counts = largest_remainder(cells / cells.sum(), self.n_apos).reshape(len(self.counts), -1)
        return HeteroPopulation(np.array(self.qualities), np.array(self.etas),
                                counts.astype(float), self.n_aliens, self.period, self.price_cap)

    def normalized(self) -> str:
        """Effective configuration with every default filled in."""
        cp = configparser.ConfigParser()
        fmt = lambda xs: ", ".join(f"{x:.12g}" for x in xs)
        cp["scenario"] = {"name": self.name}
        pop = {"n_types": str(len(self.qualities)), "qualities": fmt(self.qualities),
               "n_apos": str(self.n_apos), "distribution": self.distribution,
               "counts": fmt(self.counts), "n_aliens": f"{self.n_aliens:.12g}",
               "price_cap": f"{self.price_cap:.12g}", "period": f"{self.period:.12g}"}
        if self.etas is None:
            pop["eta"] = f"{self.eta:.12g}"
        else:
            pop["etas"] = fmt(self.etas)
            pop["level_shares"] = fmt(self.level_shares or (1.0,) * len(self.etas))
        cp["population"] = pop
        cp["solver"] = {"epsilon": f"{self.epsilon:.12g}",
                        "max_iterations": str(self.max_iterations),
                        "grid_points": str(self.grid_points)}
        if self.sweep_parameter:
            cp["sweep"] = {"parameter": self.sweep_parameter, "values": fmt(self.sweep_values)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights`` (Hamilton's method).

    Ties in the remainders go to the lower index.
    """
    w = np.asarray(weights, dtype=float)
    quota = w / w.sum() * total
    base = np.floor(quota).astype(int)
    extra = total - int(base.sum())
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:extra]] += 1
    return base


def distribution_counts(shape: str, n_types: int, n_apos: int) -> np.ndarray:
    if shape not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {shape!r}")
    if n_apos < n_types:
        raise ValueError("need at least one APO per type")
    k = np.arange(1, n_types + 1, dtype=float)
    weights = {"uniform": np.ones(n_types), "low-dominant": n_types + 1 - k,
               "high-dominant": k, "medium-dominant": np.minimum(k, n_types + 1 - k)}[shape]
    return 1 + largest_remainder(weights, n_apos - n_types)


def _key_lines(text: str) -> dict[tuple[str | None, str | None], int]:
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if m := re.match(r"\[(.+)\]$", s):
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), i)
        elif m := re.match(r"([^=:]+)[=:]", s):
            lines.setdefault((section, m.group(1).strip().lower()), i)
    return lines


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, lines: dict):
        self.cp, self.lines = cp, lines

    def fail(self, section, key, message):
        raise ConfigError(message, section, key, self.lines.get((section, key))
                          or self.lines.get((section, None)))

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key):
        return self.cp.get(section, key).strip()

    def number(self, section, key, default=None, integer=False):
        if not self.has(section, key):
            if default is None:
                self.fail(section, key, "required field is missing")
            return default
        try:
            v = float(self.raw(section, key))
        except ValueError:
            self.fail(section, key, f"expected a number, got {self.raw(section, key)!r}")
        if not math.isfinite(v):
            self.fail(section, key, "value must be finite")
        if integer:
            if v != int(v):
                self.fail(section, key, "expected an integer")
            return int(v)
        return v

    def numbers(self, section, key):
        if not self.has(section, key):
            return None
        try:
            vals = tuple(float(x) for x in self.raw(section, key).split(",") if x.strip())
        except ValueError:
            self.fail(section, key, "expected a comma-separated list of numbers")
        if not vals or not all(math.isfinite(v) for v in vals):
            self.fail(section, key, "expected a nonempty list of finite numbers")
        return vals


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".splitlines()[0],
                          line=getattr(exc, "lineno", None)) from None
    r = _Reader(cp, _key_lines(text))
    for section in cp.sections():
        if section not in _SECTIONS:
            r.fail(section, None, "unknown section")
        for key in cp.options(section):
            if key not in _SECTIONS[section]:
                r.fail(section, key, "unknown field")
    for section, keys in _REQUIRED.items():
        if not cp.has_section(section):
            raise ConfigError("required section is missing", section)
        for key in keys:
            if not r.has(section, key):
                r.fail(section, key, "required field is missing")

    P = "population"
    name = r.raw("scenario", "name")
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        r.fail("scenario", "name", "use letters, digits, '_', '-' or '.' only")
    K = r.number(P, "n_types", integer=True)
    if K < 1:
        r.fail(P, "n_types", "must be at least 1")
    qualities = r.numbers(P, "qualities") or tuple(float(k) for k in range(1, K + 1))
    if len(qualities) != K:
        r.fail(P, "qualities", f"expected {K} values, got {len(qualities)}")
    if qualities[0] <= 0 or any(b <= a for a, b in zip(qualities, qualities[1:])):
        r.fail(P, "qualities", "must be positive and strictly increasing")
    n_apos = r.number(P, "n_apos", integer=True)
    dist = r.raw(P, "distribution") if r.has(P, "distribution") else "uniform"
    if dist not in DISTRIBUTIONS:
        r.fail(P, "distribution", f"must be one of {', '.join(DISTRIBUTIONS)}")
    if n_apos < K:
        r.fail(P, "n_apos", "need at least one APO per type")
    counts = r.numbers(P, "counts")
    if counts is not None:
        if len(counts) != K or any(c < 1 or c != int(c) for c in counts):
            r.fail(P, "counts", f"expected {K} positive integers")
        if sum(counts) != n_apos:
            r.fail(P, "counts", f"counts sum to {sum(counts):g}, not n_apos={n_apos}")
        counts = tuple(int(c) for c in counts)
    else:
        counts = tuple(int(c) for c in distribution_counts(dist, K, n_apos))
    eta = r.number(P, "eta", 0.5)
    if not 0 <= eta <= 1:
        r.fail(P, "eta", "must lie in [0, 1]")
    etas = r.numbers(P, "etas")
    shares = r.numbers(P, "level_shares")
    if etas is not None:
        if any(not 0 <= e <= 1 for e in etas):
            r.fail(P, "etas", "values must lie in [0, 1]")
        if any(b <= a for a, b in zip(etas, etas[1:])):
            r.fail(P, "etas", "must be strictly increasing")
        if shares is not None and (len(shares) != len(etas) or any(s <= 0 for s in shares)):
            r.fail(P, "level_shares", f"expected {len(etas)} positive values")
    elif shares is not None:
        r.fail(P, "level_shares", "only valid together with etas")
    n_aliens = r.number(P, "n_aliens")
    if n_aliens < 0:
        r.fail(P, "n_aliens", "must be nonnegative")
    price_cap = r.number(P, "price_cap")
    if price_cap <= 0:
        r.fail(P, "price_cap", "must be positive")
    period = r.number(P, "period", 1.0)
    if period <= 0:
        r.fail(P, "period", "must be positive")

    S = "solver"
    epsilon = r.number(S, "epsilon", 1e-4)
    max_iter = r.number(S, "max_iterations", 100_000, integer=True)
    grid_points = r.number(S, "grid_points", 101, integer=True)
    if epsilon <= 0:
        r.fail(S, "epsilon", "must be positive")
    if max_iter < 1:
        r.fail(S, "max_iterations", "must be at least 1")
    if grid_points < 2:
        r.fail(S, "grid_points", "must be at least 2")

    param, values = None, ()
    if cp.has_section("sweep"):
        if not r.has("sweep", "parameter"):
            r.fail("sweep", "parameter", "required field is missing")
        param = r.raw("sweep", "parameter")
        if param not in SWEEP_PARAMETERS:
            r.fail("sweep", "parameter",
                   f"unknown sweep parameter {param!r}; use {' or '.join(SWEEP_PARAMETERS)}")
        values = r.numbers("sweep", "values")
        if values is None:
            r.fail("sweep", "values", "required field is missing")
        if any(v < 0 for v in values):
            r.fail("sweep", "values", "values must be nonnegative")
        if param == "eta_1":
            if any(v > 1 for v in values):
                r.fail("sweep", "values", "mobility values must lie in [0, 1]")
            if etas is not None and len(etas) > 1 and any(v >= etas[1] for v in values):
                r.fail("sweep", "values", "eta_1 must stay below the second mobility level")

    return Scenario(name=name, qualities=qualities, counts=counts, n_apos=n_apos,
                    distribution=dist, eta=eta, etas=etas, level_shares=shares,
                    n_aliens=n_aliens, price_cap=price_cap, period=period, epsilon=epsilon,
                    max_iterations=max_iter, grid_points=grid_points,
                    sweep_parameter=param, sweep_values=values)


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_scenario(text)
