"""Scenario configs, deterministic sweeps, and CSV emission.

A scenario file is flat ``key = value`` text: one pair per line, ``#``
starts a comment, commas separate list values.  Two models exist:

* ``model = competitive``: the two-firm market.  Keys: W_e, W_d, alpha,
  beta, epsilon, delta, r, t, s, pricing (comma list of two-price /
  optimal-single / naive-single), capacity (naive-mandate / optimal),
  sweep (r / delta / none) and sweep_min / sweep_max / sweep_step.
* ``model = monopolist``: the single-firm model.  Keys: W_e, W_d, epsilon,
  p (or t and s), q (comma list), pi (comma list).

Optional keys for both models: output (default output path), seed (for the
multistart diagnostic), multistart (restart count, 0 disables).

Unknown keys are rejected with their line number.  Sweeps are fully
deterministic: the grid is sweep_min + k * sweep_step (endpoints
inclusive), rows are ordered by sweep value then regime name, floats are
written with 12 significant digits, and the only randomness (multistart
initial points) comes from the seeded generator.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .capacity import (
    CapacityConvergenceError,
    CapacityEquilibrium,
    CapacityRegime,
    PolicyConfig,
    capacity_deviation_improvement,
    naive_mandate_capacities,
    optimal_capacity_equilibrium,
    regime_prices,
)
from .market import MarketParams, wardrop_quantities
from .monopolist import (
    DemandDistribution,
    MonopolistParams,
    PricingCase,
    case1_price,
    expected_profit,
    InfeasibleCaseError,
    optimal_capacity_case1,
    profit_profile,
    solve_monopolist,
    verify_theorem_assumptions,
)
from .pricing import (
    PriceConvergenceError,
    PricingRegime,
    optimal_single_price_equilibrium,
    price_deviation_improvement,
)
from .welfare import welfare_report


class ConfigError(Exception):
    """Base class for scenario-file problems; carries key and line context."""

    def __init__(self, message: str, *, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if key is not None:
            parts.append(f"key '{key}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MissingKeyError(ConfigError):
    """A required key is absent from the scenario file."""


class UnknownKeyError(ConfigError):
    """A key is not recognised for the scenario's model."""


class MalformedValueError(ConfigError):
    """A value could not be parsed (bad number, bad enum, bad syntax)."""


class ConstraintError(ConfigError):
    """Values parsed but violate a model constraint (ranges, ordering, sums)."""


@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario, ready to run."""

    model: str
    market: MarketParams | None = None
    delta: float | None = None
    policy: PolicyConfig | None = None
    pricing: tuple[PricingRegime, ...] = ()
    capacity: CapacityRegime | None = None
    sweep: str = "none"
    sweep_min: float | None = None
    sweep_max: float | None = None
    sweep_step: float | None = None
    mono: MonopolistParams | None = None
    dist: DemandDistribution | None = None
    seed: int = 0
    multistart: int = 3
    output: str | None = None


_COMP_KEYS = {
    "model", "W_e", "W_d", "alpha", "beta", "epsilon", "delta", "r", "t", "s",
    "pricing", "capacity", "sweep", "sweep_min", "sweep_max", "sweep_step",
    "seed", "multistart", "output",
}
_MONO_KEYS = {"model", "W_e", "W_d", "epsilon", "p", "t", "s", "q", "pi",
              "seed", "multistart", "output"}

_REGIME_NAMES = {r.value: r for r in PricingRegime}
_CAPACITY_NAMES = {c.value: c for c in CapacityRegime}


def _parse_pairs(text: str) -> dict[str, tuple[str, int]]:
    pairs: dict[str, tuple[str, int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedValueError("expected 'key = value'", line=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise MalformedValueError("empty key before '='", line=line_no)
        if not value:
            raise MalformedValueError("empty value", key=key, line=line_no)
        if key in pairs:
            raise MalformedValueError(
                f"duplicate key (first given on line {pairs[key][1]})", key=key, line=line_no
            )
        pairs[key] = (value, line_no)
    return pairs


def _take_float(pairs, key) -> tuple[float, int]:
    value, line = pairs[key]
    try:
        parsed = float(value)
    except ValueError:
        raise MalformedValueError(f"not a number: {value!r}", key=key, line=line) from None
    if not math.isfinite(parsed):
        raise MalformedValueError(f"not finite: {value!r}", key=key, line=line)
    return parsed, line


def _take_float_list(pairs, key) -> tuple[tuple[float, ...], int]:
    value, line = pairs[key]
    items = [part.strip() for part in value.split(",")]
    out = []
    for part in items:
        if not part:
            raise MalformedValueError("empty list entry", key=key, line=line)
        try:
            out.append(float(part))
        except ValueError:
            raise MalformedValueError(f"not a number: {part!r}", key=key, line=line) from None
    return tuple(out), line


def _take_int(pairs, key) -> tuple[int, int]:
    value, line = pairs[key]
    try:
        parsed = int(value)
    except ValueError:
        raise MalformedValueError(f"not an integer: {value!r}", key=key, line=line) from None
    return parsed, line


def _require(pairs, key):
    if key not in pairs:
        raise MissingKeyError("required key is missing", key=key)


def load_scenario(text: str) -> Scenario:
    """Parse and validate scenario text.

    Raises the relevant :class:`ConfigError` subclass with the offending
    key and line number where one exists.
    """
    pairs = _parse_pairs(text)
    _require(pairs, "model")
    model, model_line = pairs["model"]
    if model not in ("competitive", "monopolist"):
        raise MalformedValueError(
            f"model must be 'competitive' or 'monopolist', got {model!r}",
            key="model", line=model_line,
        )

    allowed = _COMP_KEYS if model == "competitive" else _MONO_KEYS
    for key, (_, line) in pairs.items():
        if key not in allowed:
            raise UnknownKeyError(f"not a valid key for model '{model}'", key=key, line=line)

    seed = 0
    if "seed" in pairs:
        seed, line = _take_int(pairs, "seed")
        if seed < 0:
            raise ConstraintError("seed must be nonnegative", key="seed", line=line)
    multistart = 3
    if "multistart" in pairs:
        multistart, line = _take_int(pairs, "multistart")
        if multistart < 0:
            raise ConstraintError("multistart must be nonnegative", key="multistart", line=line)
    output = pairs["output"][0] if "output" in pairs else None

    if model == "competitive":
        return _load_competitive(pairs, seed, multistart, output)
    return _load_monopolist(pairs, seed, multistart, output)


def _load_competitive(pairs, seed, multistart, output) -> Scenario:
    for key in ("W_e", "W_d", "alpha", "beta", "epsilon", "delta", "pricing", "capacity", "sweep"):
        _require(pairs, key)
    numbers = {}
    for key in ("W_e", "W_d", "alpha", "beta", "epsilon", "delta"):
        numbers[key], _ = _take_float(pairs, key)
    for key, default in (("r", 0.0), ("t", 0.0), ("s", 0.0)):
        numbers[key] = _take_float(pairs, key)[0] if key in pairs else default

    try:
        market = MarketParams(
            numbers["W_e"], numbers["W_d"], numbers["alpha"], numbers["beta"], numbers["epsilon"]
        )
    except ValueError as exc:
        raise ConstraintError(str(exc)) from None
    if not 0.0 <= numbers["delta"] <= 1.0:
        raise ConstraintError(
            f"delta must lie in [0, 1], got {numbers['delta']}",
            key="delta", line=pairs["delta"][1],
        )
    try:
        policy = PolicyConfig(numbers["r"], numbers["t"], numbers["s"])
    except ValueError as exc:
        raise ConstraintError(str(exc)) from None

    value, line = pairs["pricing"]
    regimes = []
    for part in (piece.strip() for piece in value.split(",")):
        if part not in _REGIME_NAMES:
            raise MalformedValueError(
                f"unknown pricing regime {part!r} (expected one of "
                f"{sorted(_REGIME_NAMES)})", key="pricing", line=line,
            )
        regime = _REGIME_NAMES[part]
        if regime not in regimes:
            regimes.append(regime)

    value, line = pairs["capacity"]
    if value not in _CAPACITY_NAMES:
        raise MalformedValueError(
            f"unknown capacity regime {value!r} (expected one of {sorted(_CAPACITY_NAMES)})",
            key="capacity", line=line,
        )
    capacity = _CAPACITY_NAMES[value]

    sweep, sweep_line = pairs["sweep"]
    if sweep not in ("r", "delta", "none"):
        raise MalformedValueError(
            f"sweep must be 'r', 'delta' or 'none', got {sweep!r}",
            key="sweep", line=sweep_line,
        )
    sweep_min = sweep_max = sweep_step = None
    if sweep != "none":
        for key in ("sweep_min", "sweep_max", "sweep_step"):
            _require(pairs, key)
        sweep_min, _ = _take_float(pairs, "sweep_min")
        sweep_max, _ = _take_float(pairs, "sweep_max")
        sweep_step, step_line = _take_float(pairs, "sweep_step")
        if sweep_step <= 0.0:
            raise ConstraintError(
                f"sweep_step must be strictly positive, got {sweep_step}",
                key="sweep_step", line=step_line,
            )
        if sweep_max < sweep_min:
            raise ConstraintError(
                f"sweep_max must be >= sweep_min, got [{sweep_min}, {sweep_max}]",
                key="sweep_max", line=pairs["sweep_max"][1],
            )
        if sweep_min < 0.0 or sweep_max > 1.0:
            raise ConstraintError(
                f"swept values must stay inside [0, 1], got [{sweep_min}, {sweep_max}]",
                key="sweep_min", line=pairs["sweep_min"][1],
            )
    else:
        for key in ("sweep_min", "sweep_max", "sweep_step"):
            if key in pairs:
                raise ConstraintError(
                    "sweep grid keys are only valid with an active sweep",
                    key=key, line=pairs[key][1],
                )

    return Scenario(
        model="competitive",
        market=market,
        delta=numbers["delta"],
        policy=policy,
        pricing=tuple(regimes),
        capacity=capacity,
        sweep=sweep,
        sweep_min=sweep_min,
        sweep_max=sweep_max,
        sweep_step=sweep_step,
        seed=seed,
        multistart=multistart,
        output=output,
    )


def _load_monopolist(pairs, seed, multistart, output) -> Scenario:
    for key in ("W_e", "W_d", "epsilon", "q", "pi"):
        _require(pairs, key)
    W_e, _ = _take_float(pairs, "W_e")
    W_d, _ = _take_float(pairs, "W_d")
    epsilon, _ = _take_float(pairs, "epsilon")

    if "p" in pairs:
        if "t" in pairs or "s" in pairs:
            raise ConstraintError(
                "give either p or the pair t/s, not both", key="p", line=pairs["p"][1]
            )
        p, _ = _take_float(pairs, "p")
    else:
        if "t" not in pairs:
            raise MissingKeyError("required key is missing (give p, or t with optional s)",
                                  key="p")
        t, _ = _take_float(pairs, "t")
        s = _take_float(pairs, "s")[0] if "s" in pairs else 0.0
        try:
            p = PolicyConfig(0.0, t, s).p
        except ValueError as exc:
            raise ConstraintError(str(exc)) from None

    q, q_line = _take_float_list(pairs, "q")
    pi, pi_line = _take_float_list(pairs, "pi")
    try:
        mono = MonopolistParams(W_e, W_d, epsilon, p)
    except ValueError as exc:
        raise ConstraintError(str(exc)) from None
    try:
        dist = DemandDistribution(q, pi)
    except ValueError as exc:
        key = "pi" if "probabilit" in str(exc) or "length" in str(exc) else "q"
        line = pi_line if key == "pi" else q_line
        raise ConstraintError(str(exc), key=key, line=line) from None

    return Scenario(
        model="monopolist",
        mono=mono,
        dist=dist,
        seed=seed,
        multistart=multistart,
        output=output,
    )


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(fh.read())


def replace_pricing(scenario: Scenario, regime_name: str) -> Scenario:
    """Copy of the scenario restricted to a single pricing regime."""
    if regime_name not in _REGIME_NAMES:
        raise MalformedValueError(
            f"unknown pricing regime {regime_name!r}", key="pricing"
        )
    return replace(scenario, pricing=(_REGIME_NAMES[regime_name],))


def sweep_values(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid lo, lo + step, ... up to hi (within rounding slack)."""
    count = int(math.floor((hi - lo) / step + 1e-9))
    return [lo + k * step for k in range(count + 1)]


# Column orders are part of the output contract; see docs/columns.md.
MANDATE_COLUMNS = [
    "r", "regime", "status",
    "N_e1", "N_e2", "N_d1", "N_d2",
    "c1", "c2", "m1", "m2",
    "q_e1", "q_e2", "q_d1", "q_d2",
    "avg_price_ev", "avg_price_ice",
    "profit_1", "profit_2", "profit_total",
    "cs_ev", "cs_ice", "govt_cost", "total_welfare", "total_congestion",
    "hhi_ev", "hhi_ice",
    "capacity_rounds", "multistart_spread",
    "price_scan_improvement", "capacity_scan_improvement",
]

DELTA_COLUMNS = [
    "delta", "policy", "status", "r", "s", "p",
    "N_e1", "N_e2", "N_d1", "N_d2",
    "c1", "c2", "m1", "m2",
    "q_e1", "q_e2", "q_d1", "q_d2",
    "avg_price_ev", "avg_price_ice",
    "profit_1", "profit_2", "profit_total",
    "cs_ev", "cs_ice", "govt_cost", "total_welfare", "total_congestion",
    "hhi_ev", "hhi_ice",
    "capacity_rounds", "multistart_spread",
    "price_scan_improvement", "capacity_scan_improvement",
]

MONOPOLIST_COLUMNS = [
    "row_type", "target", "case", "N_e", "price_ev", "price_ice",
    "expected_profit", "feasible",
    "assumption_price", "assumption_cost", "used_closed_form", "oracle_gap",
    "status",
]


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return ""
        if value == 0.0:
            value = 0.0  # normalise -0.0
        return f"{value:.12g}"
    return str(value)


def emit_csv(rows: list[dict], columns: list[str], path) -> None:
    """Write rows as RFC-4180 CSV with LF line endings, missing cells blank."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row.get(col)) for col in columns])


def _solved_row(market, policy, capacities, regime, prices, outcome):
    report = welfare_report(
        market, capacities, prices, outcome, p=policy.p, s=policy.s
    )
    return {
        "status": "ok",
        "N_e1": capacities.N_e1, "N_e2": capacities.N_e2,
        "N_d1": capacities.N_d1, "N_d2": capacities.N_d2,
        "c1": prices.c1, "c2": prices.c2, "m1": prices.m1, "m2": prices.m2,
        "q_e1": outcome.q_e1, "q_e2": outcome.q_e2,
        "q_d1": outcome.q_d1, "q_d2": outcome.q_d2,
        "avg_price_ev": report.avg_price_ev, "avg_price_ice": report.avg_price_ice,
        "profit_1": report.profit_1, "profit_2": report.profit_2,
        "profit_total": report.profit_1 + report.profit_2,
        "cs_ev": report.cs_ev, "cs_ice": report.cs_ice,
        "govt_cost": report.govt_cost, "total_welfare": report.total_welfare,
        "total_congestion": report.total_congestion,
        "hhi_ev": report.hhi_ev, "hhi_ice": report.hhi_ice,
    }


def _multistart_capacity_spread(market, policy, delta, regime, base: CapacityEquilibrium,
                                rng, restarts) -> float:
    spread = 0.0
    N1, N2 = delta, 1.0 - delta
    lo1, lo2 = policy.r * N1, policy.r * N2
    for _ in range(restarts):
        u1, u2 = rng.uniform(size=2)
        init = (lo1 + u1 * (N1 - lo1), lo2 + u2 * (N2 - lo2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                alt = optimal_capacity_equilibrium(
                    market, policy, delta, regime,
                    allow_unsupported_pricing=True, initial=init,
                )
            except CapacityConvergenceError:
                return float("inf")
        spread = max(
            spread,
            abs(alt.capacities.N_e1 - base.capacities.N_e1),
            abs(alt.capacities.N_e2 - base.capacities.N_e2),
        )
    return spread


def _multistart_price_spread(market, capacities, base_prices, rng, restarts) -> float:
    spread = 0.0
    for _ in range(restarts):
        init = tuple(rng.uniform(0.0, market.W_d, size=2))
        try:
            alt = optimal_single_price_equilibrium(market, capacities, initial=init)
        except PriceConvergenceError:
            return float("inf")
        for a, b in ((alt.m1, base_prices.m1), (alt.m2, base_prices.m2)):
            if a is not None and b is not None:
                spread = max(spread, abs(a - b))
    return spread


def _solve_competitive_cell(scenario, r, regime, rng, oracle):
    """One (policy, regime) cell: capacities, prices, welfare, diagnostics."""
    market = scenario.market
    delta = scenario.delta
    policy = PolicyConfig(r, scenario.policy.t, scenario.policy.s)
    row: dict = {}
    warn_tags: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if scenario.capacity is CapacityRegime.NAIVE_MANDATE:
            capacities = naive_mandate_capacities(r, delta)
            equilibrium = None
        else:
            equilibrium = optimal_capacity_equilibrium(
                market, policy, delta, regime, allow_unsupported_pricing=True
            )
            capacities = equilibrium.capacities
        prices = regime_prices(market, capacities, regime)
        outcome = wardrop_quantities(market, capacities, prices)
    warn_tags = sorted({type(w.message).__name__ for w in caught})

    row.update(_solved_row(market, policy, capacities, regime, prices, outcome))
    if warn_tags:
        row["status"] = "ok+warn:" + "+".join(warn_tags)
    if equilibrium is not None:
        row["capacity_rounds"] = equilibrium.rounds
        if scenario.multistart > 0:
            row["multistart_spread"] = _multistart_capacity_spread(
                market, policy, delta, regime, equilibrium, rng, scenario.multistart
            )
        if oracle:
            row["capacity_scan_improvement"] = capacity_deviation_improvement(
                market, policy, delta, regime,
                capacities.N_e1, capacities.N_e2,
            )
    if regime is PricingRegime.OPTIMAL_SINGLE and scenario.multistart > 0:
        spread = _multistart_price_spread(market, capacities, prices, rng, scenario.multistart)
        row["multistart_spread"] = max(row.get("multistart_spread", 0.0), spread)
    if oracle and regime is not PricingRegime.NAIVE_SINGLE:
        row["price_scan_improvement"] = price_deviation_improvement(
            market, capacities, prices,
            joint=regime is PricingRegime.OPTIMAL_SINGLE,
        )
    return row


def run_mandate_sweep(scenario: Scenario, *, oracle: bool = False) -> list[dict]:
    """Sweep the mandate share r; one row per grid value and pricing regime."""
    if scenario.model != "competitive" or scenario.sweep != "r":
        raise ValueError("mandate sweep needs a competitive scenario with sweep = r")
    rng = np.random.default_rng(scenario.seed)
    rows = []
    for r in sweep_values(scenario.sweep_min, scenario.sweep_max, scenario.sweep_step):
        for regime in sorted(scenario.pricing, key=lambda reg: reg.value):
            row = {"r": r, "regime": regime.value}
            try:
                row.update(_solve_competitive_cell(scenario, r, regime, rng, oracle))
            except (CapacityConvergenceError, PriceConvergenceError) as exc:
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
    return rows


_POLICY_CELLS = ("a-none", "b-subsidy", "c-mandate", "d-both")


def run_delta_sweep(scenario: Scenario, *, oracle: bool = False) -> list[dict]:
    """Sweep the endowment share delta over four policy variants.

    At each delta the capacity game is solved with (a) no intervention,
    (b) subsidy only, (c) mandate only, (d) both, where the mandate share
    and subsidy magnitudes come from the scenario's r and s keys.  Requires
    the optimal capacity regime with two-price pricing.
    """
    if scenario.model != "competitive" or scenario.sweep != "delta":
        raise ValueError("delta sweep needs a competitive scenario with sweep = delta")
    if scenario.capacity is not CapacityRegime.OPTIMAL:
        raise ValueError("delta sweep requires capacity = optimal")
    if scenario.pricing != (PricingRegime.TWO_PRICE,):
        raise ValueError("delta sweep requires pricing = two-price")
    base = scenario.policy
    cells = {
        "a-none": PolicyConfig(0.0, base.t, 0.0),
        "b-subsidy": PolicyConfig(0.0, base.t, base.s),
        "c-mandate": PolicyConfig(base.r, base.t, 0.0),
        "d-both": PolicyConfig(base.r, base.t, base.s),
    }
    rng = np.random.default_rng(scenario.seed)
    rows = []
    for delta in sweep_values(scenario.sweep_min, scenario.sweep_max, scenario.sweep_step):
        for name in _POLICY_CELLS:
            policy = cells[name]
            cell_scenario = replace(scenario, policy=policy, delta=delta)
            row = {"delta": delta, "policy": name,
                   "r": policy.r, "s": policy.s, "p": policy.p}
            try:
                row.update(_solve_competitive_cell(
                    cell_scenario, policy.r, PricingRegime.TWO_PRICE, rng, oracle
                ))
            except (CapacityConvergenceError, PriceConvergenceError) as exc:
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
    return rows


def run_monopolist_suite(scenario: Scenario, *, profile: bool = False) -> list[dict]:
    """Closed-form candidates per target, the solved optimum, optional profile."""
    if scenario.model != "monopolist":
        raise ValueError("monopolist suite needs a monopolist scenario")
    params = scenario.mono
    dist = scenario.dist
    assumptions = verify_theorem_assumptions(params, dist)
    flags = {
        "assumption_price": assumptions.price_condition,
        "assumption_cost": assumptions.cost_condition,
    }
    rows = []
    for t in range(1, len(dist) + 1):
        n_t = optimal_capacity_case1(params, dist, t)
        row = {"row_type": "target", "target": t, "case": f"target-{t}",
               "N_e": n_t, "price_ice": params.W_d / 2.0, "status": "ok", **flags}
        price = case1_price(params, dist, n_t, t) if n_t > 0.0 else None
        feasible = price is not None and price >= 0.0
        row["feasible"] = feasible
        if feasible:
            row["price_ev"] = price
            try:
                row["expected_profit"] = expected_profit(
                    params, dist, n_t, PricingCase("target", t)
                )
            except InfeasibleCaseError:
                row["feasible"] = False
        rows.append(row)

    solution = solve_monopolist(params, dist)
    rows.append({
        "row_type": "solution",
        "target": solution.case.t,
        "case": solution.case.label(),
        "N_e": solution.N_e,
        "price_ev": solution.price_ev,
        "price_ice": solution.price_ice,
        "expected_profit": solution.expected_profit,
        "feasible": True,
        "used_closed_form": solution.used_closed_form,
        "oracle_gap": solution.oracle_gap,
        "status": "ok",
        **flags,
    })

    if profile:
        grid, profits, cases = profit_profile(params, dist)
        for n_e, value, case in zip(grid, profits, cases):
            rows.append({
                "row_type": "profile",
                "target": case.t,
                "case": case.label(),
                "N_e": float(n_e),
                "expected_profit": float(value),
                "status": "ok",
            })
    return rows
