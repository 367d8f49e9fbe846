"""Acceptance suite: one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
print; on failures pytest shows the captured lines either way.

Two assertions are expected to fail and are kept faithful rather than
loosened; both concern the large-EV-market configuration (alpha = 2):

* criterion 3, large-EV leg: the welfare-maximizing mandate sits at
  r = 0.42 for every pricing regime, outside the required 0.5 +- 0.05.
  The welfare curve is nearly flat there (0.7% spread), the small-EV leg
  passes, and all equilibria are independently certified.
* annex ordering: the two-price average EV price drops below the
  carried-over single price on r in [0.92, 1.0].  At r = 1 that
  equilibrium is certified directly; with a steep EV demand slope,
  optimized EV competition undercuts the legacy price once nearly all
  capacity is charger-equipped.  The claim holds on r in [0, 0.9].
"""
import time

import numpy as np
import pytest

from evpark.capacity import (
    PolicyConfig,
    capacity_deviation_improvement,
    naive_mandate_capacities,
    optimal_capacity_equilibrium,
)
from evpark.cli import main as cli_main
from evpark.market import (
    DRIVER_CLASSES,
    EV,
    CapacityProfile,
    MarketParams,
    check_no_profitable_undercut,
    marginal_utility,
    wardrop_quantities,
)
from evpark.monopolist import (
    DemandDistribution,
    MonopolistParams,
    grid_oracle,
    optimal_capacity_case1,
    solve_monopolist,
    verify_theorem_assumptions,
)
from evpark.pricing import (
    PricingRegime,
    best_response_price,
    price_deviation_improvement,
    two_price_equilibrium,
)
from evpark.scenarios import (
    MANDATE_COLUMNS,
    MONOPOLIST_COLUMNS,
    ConstraintError,
    MalformedValueError,
    MissingKeyError,
    UnknownKeyError,
    emit_csv,
    load_scenario,
    run_delta_sweep,
    run_mandate_sweep,
    run_monopolist_suite,
)
from evpark.welfare import consumer_surplus


def report(name: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    suffix = f" - {detail}" if detail else ""
    print(f"[acceptance] {name}: {verdict}{suffix}")


def mandate_config(alpha: float, pricing: str, step: float = 0.01) -> str:
    return (
        "model = competitive\n"
        "W_e = 1.25\nW_d = 1\n"
        f"alpha = {alpha}\nbeta = 1\nepsilon = 1\ndelta = 0.6\n"
        f"pricing = {pricing}\ncapacity = naive-mandate\n"
        f"sweep = r\nsweep_min = 0\nsweep_max = 1\nsweep_step = {step}\n"
    )


DELTA_CONFIG = (
    "model = competitive\n"
    "W_e = 1.0\nW_d = 0.9\nalpha = 1.0\nbeta = 0.33\nepsilon = 1\n"
    "delta = 0.6\nr = 0.33\nt = 0.1\ns = 0.1\n"
    "pricing = two-price\ncapacity = optimal\n"
    "sweep = delta\nsweep_min = 0.5\nsweep_max = 0.9\nsweep_step = 0.1\n"
    "multistart = 0\n"
)

MONO_CONFIG = (
    "model = monopolist\n"
    "W_e = 1.25\nW_d = 1\nepsilon = 1\np = 0.01\n"
    "q = 0.1, 0.15, 0.3\npi = 0.4, 0.33, 0.27\n"
)


def wardrop_residual(params, capacities, prices, outcome) -> float:
    """Largest complementarity violation: used cells need zero marginal
    utility, open unused cells need nonpositive marginal utility."""
    worst = 0.0
    for driver_class in DRIVER_CLASSES:
        pair_n = capacities.class_pair(driver_class)
        pair_p = prices.class_pair(driver_class)
        pair_q = outcome.class_pair(driver_class)
        for firm, n, p, q in zip((1, 2), pair_n, pair_p, pair_q):
            if n <= 0.0 or p is None:
                continue
            u = marginal_utility(params, driver_class, firm, pair_q, capacities, prices)
            worst = max(worst, abs(u) if q > 0.0 else u)
    return worst


def best_response_gap(params, capacities, prices) -> float:
    """Largest |BR(price) - price| across all four firm/class cells."""
    worst = 0.0
    for driver_class in DRIVER_CLASSES:
        n1, n2 = capacities.class_pair(driver_class)
        p1, p2 = prices.class_pair(driver_class)
        for own_n, opp_n, own_p, opp_p in ((n1, n2, p1, p2), (n2, n1, p2, p1)):
            if own_p is None:
                continue
            br = best_response_price(
                params, driver_class, own_n, opp_n,
                opp_p if opp_p is not None else 0.0,
            )
            worst = max(worst, abs(br - own_p))
    return worst


def test_criterion_1_monopolist_case_values():
    name = "criterion 1 (monopolist case values)"
    q_low = (0.1, 0.15, 0.3)
    q_high = (0.1, 0.15, 0.5)
    cases = [
        ("a", q_low, (0.4, 0.33, 0.27), 0.01, 0.196, 0.196, 1),
        ("b", q_low, (0.31, 0.33, 0.36), 0.01, 0.279, 0.279, 2),
        ("c", q_high, (0.31, 0.33, 0.36), 0.01, 0.278, 0.279, 2),
        ("d", q_high, (0.2, 0.1, 0.7), 0.01, 0.860, 0.860, 3),
        ("e", q_high, (0.2, 0.15, 0.65), 0.01, 0.284, 0.284, 2),
        ("f", q_high, (0.2, 0.15, 0.65), 0.0, 0.857, 0.857, 3),
    ]
    start = time.perf_counter()
    misses = []
    for label, q, pi, p, lo, hi, t in cases:
        sol = solve_monopolist(
            MonopolistParams(1.25, 1.0, 1.0, p), DemandDistribution(q, pi)
        )
        if not (lo - 0.002 <= sol.N_e <= hi + 0.002 and sol.case.label() == f"target-{t}"):
            misses.append(f"{label}: N_e={sol.N_e:.4f} case={sol.case.label()}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 1.0
    report(name, ok, f"6 scenarios, {elapsed:.3f} s" + (f"; misses: {misses}" if misses else ""))
    assert not misses, misses
    assert elapsed < 1.0, f"took {elapsed:.3f} s, budget 1 s"


def test_criterion_2_closed_form_matches_grid_oracle():
    # Draws satisfy the closed-form optimum's sufficient conditions with
    # margin (cost condition at 70% of the derived bound) and an
    # interiority screen: the largest target candidate must stay below
    # 0.95, keeping the optimum away from the N_e = 1 cap where a pinned
    # between-pattern can dominate every target candidate.
    name = "criterion 2 (closed form vs grid oracle)"
    rng = np.random.default_rng(991)
    worst_dp = worst_dn = 0.0
    failures = []
    draws = 0
    while draws < 200:
        W_d = rng.uniform(0.5, 1.2)
        W_e = W_d + rng.uniform(0.1, 0.8)
        eps = rng.uniform(0.5, 2.0)
        n = int(rng.integers(2, 6))
        q = np.sort(rng.uniform(0.02, 0.95, size=n))
        if np.diff(q).min() < 0.01:
            continue
        pi = rng.dirichlet(np.ones(n))
        if pi.min() < 0.02:
            continue
        p = rng.uniform(0.0, 0.7 * (W_e**2 - W_d**2) / (4.0 * eps))
        if not W_e / 2.0 > eps * q[0]:
            continue
        params = MonopolistParams(W_e, W_d, eps, p)
        dist = DemandDistribution(tuple(q), tuple(pi))
        if optimal_capacity_case1(params, dist, n) > 0.95:
            continue
        assert verify_theorem_assumptions(params, dist).both
        draws += 1

        sol = solve_monopolist(params, dist)
        oracle = grid_oracle(params, dist, resolution=1e-4, refine=True)
        dp = abs(sol.expected_profit - oracle.grid_profit)
        dn = abs(sol.N_e - oracle.N_e)
        worst_dp = max(worst_dp, dp)
        worst_dn = max(worst_dn, dn)
        if not (sol.used_closed_form and oracle.case.kind == "target"
                and dp <= 1e-6 and dn <= 5e-4):
            failures.append((params, dist, dp, dn, oracle.case.label()))
    ok = not failures
    report(name, ok,
           f"200 draws, worst profit gap {worst_dp:.1e} (bar 1e-6), "
           f"worst capacity gap {worst_dn:.1e} (bar 5e-4)")
    assert ok, failures[:3]


@pytest.mark.parametrize(
    "alpha,label",
    [(5.0, "small EV market"), (2.0, "large EV market")],
    ids=["small-ev-market", "large-ev-market"],
)
def test_criterion_3_welfare_maximizing_mandate(alpha, label):
    name = f"criterion 3 (welfare-maximizing mandate, {label})"
    scenario = load_scenario(mandate_config(alpha, "naive-single"))
    start = time.perf_counter()
    rows = run_mandate_sweep(scenario)
    elapsed = time.perf_counter() - start
    best = max(rows, key=lambda row: row["total_welfare"])
    target = 1.0 / alpha
    gap = abs(best["r"] - target)
    ok = gap <= 0.05 + 1e-9 and elapsed < 30.0
    report(name, ok,
           f"argmax r = {best['r']:.2f}, required {target:.2f} +- 0.05, {elapsed:.2f} s")
    assert elapsed < 30.0, f"took {elapsed:.2f} s, budget 30 s"
    assert gap <= 0.05 + 1e-9, (
        f"welfare peaks at r = {best['r']:.2f}, outside {target:.2f} +- 0.05"
    )


def test_criterion_4_policy_cell_directional_effects():
    name = "criterion 4 (policy cell directional effects)"
    rows = run_delta_sweep(load_scenario(DELTA_CONFIG))
    by_delta: dict[float, dict[str, dict]] = {}
    for row in rows:
        by_delta.setdefault(round(row["delta"], 6), {})[row["policy"]] = row
    problems = []
    min_ratio, max_shift = float("inf"), 0.0
    for delta, cells in sorted(by_delta.items()):
        base = cells["a-none"]
        for cell_name in ("b-subsidy", "c-mandate", "d-both"):
            cell = cells[cell_name]
            if not cell["cs_ice"] < base["cs_ice"]:
                problems.append(f"{cell_name}@{delta}: cs_ice not lower")
            ratio = cell["cs_ev"] / base["cs_ev"]
            min_ratio = min(min_ratio, ratio)
            if not ratio >= 2.0:
                problems.append(f"{cell_name}@{delta}: cs_ev ratio {ratio:.2f} < 2")
            shift = abs(cell["total_welfare"] - base["total_welfare"]) / abs(base["total_welfare"])
            max_shift = max(max_shift, shift)
            if not shift < 0.15:
                problems.append(f"{cell_name}@{delta}: welfare shift {shift:.3f}")
        for cell_name in ("b-subsidy", "d-both"):
            cell = cells[cell_name]
            if not cell["govt_cost"] > 0.0:
                problems.append(f"{cell_name}@{delta}: no government cost")
            for key in ("profit_1", "profit_2"):
                if not cell[key] >= cells["c-mandate"][key] - 1e-9:
                    problems.append(f"{cell_name}@{delta}: {key} below mandate cell")
        for cell_name in ("a-none", "c-mandate"):
            if cells[cell_name]["govt_cost"] != 0.0:
                problems.append(f"{cell_name}@{delta}: unexpected government cost")
    ok = not problems
    report(name, ok,
           f"5 deltas x 3 cells: min EV-surplus ratio {min_ratio:.1f}x, "
           f"max welfare shift {100 * max_shift:.1f}% (bar 15%)")
    assert ok, problems


def test_criterion_5_equilibrium_certification():
    name = "criterion 5 (equilibrium certification)"
    rng = np.random.default_rng(4242)
    worst = {"residual": 0.0, "fixed_point": 0.0, "price_scan": 0.0, "capacity_scan": 0.0}
    for _ in range(500):
        W_d = rng.uniform(0.4, 1.4)
        W_e = W_d + rng.uniform(0.05, 0.8)
        params = MarketParams(
            W_e, W_d, rng.uniform(0.05, 1.0 / W_e), rng.uniform(0.05, 1.0 / W_d), 1.0
        )
        delta = rng.uniform(0.15, 0.85)
        t = rng.uniform(0.0, 0.3)
        policy = PolicyConfig(rng.uniform(0.0, 0.9), t, rng.uniform(0.0, t))
        r = 0.0 if rng.uniform() < 0.08 else policy.r

        capacities = naive_mandate_capacities(r, delta)
        prices = two_price_equilibrium(params, capacities)
        outcome = wardrop_quantities(params, capacities, prices)
        worst["residual"] = max(
            worst["residual"], wardrop_residual(params, capacities, prices, outcome)
        )
        worst["fixed_point"] = max(
            worst["fixed_point"], best_response_gap(params, capacities, prices)
        )
        worst["price_scan"] = max(
            worst["price_scan"], price_deviation_improvement(params, capacities, prices)
        )

        equilibrium = optimal_capacity_equilibrium(params, policy, delta)
        worst["capacity_scan"] = max(
            worst["capacity_scan"],
            capacity_deviation_improvement(
                params, policy, delta, PricingRegime.TWO_PRICE,
                equilibrium.capacities.N_e1, equilibrium.capacities.N_e2,
            ),
        )
    checks = {
        "residual": worst["residual"] < 1e-9,
        "fixed_point": worst["fixed_point"] < 1e-10,
        "price_scan": worst["price_scan"] <= 1e-8,
        "capacity_scan": worst["capacity_scan"] <= 1e-8,
    }
    ok = all(checks.values())
    report(name, ok,
           "500 draws, worst: residual {residual:.1e}, fixed point {fixed_point:.1e}, "
           "price scan {price_scan:.1e}, capacity scan {capacity_scan:.1e}".format(**worst))
    assert ok, worst


def test_criterion_6_structural_properties():
    name = "criterion 6 (structural properties)"
    rng = np.random.default_rng(77)
    problems = []

    # Equal charger splits maximize the served EV quantity for a fixed
    # total: grid argmax must land on 0.5 within the 1e-3 resolution.
    xs = np.linspace(0.0, 1.0, 1001)
    for _ in range(6):
        W_d = rng.uniform(0.5, 1.2)
        W_e = W_d + rng.uniform(0.1, 0.6)
        params = MarketParams(
            W_e, W_d, rng.uniform(0.05, 1.0 / W_e), rng.uniform(0.05, 1.0 / W_d), 1.0
        )
        K = rng.uniform(0.2, 0.8)
        ice_split = rng.uniform(0.2, 0.8)
        totals = []
        for x in xs:
            ne1, ne2 = K * x, K * (1.0 - x)
            nd1 = (1.0 - K) * ice_split
            nd2 = (1.0 - K) * (1.0 - ice_split)
            capacities = CapacityProfile(ne1 + nd1, ne1, ne2, nd1, nd2)
            prices = two_price_equilibrium(params, capacities)
            outcome = wardrop_quantities(params, capacities, prices)
            totals.append(outcome.q_e1 + outcome.q_e2)
        x_star = float(xs[int(np.argmax(totals))])
        if abs(x_star - 0.5) > 1e-3 + 1e-12:
            problems.append(f"EV quantity peaks at split {x_star}, not 0.5")

    # A steeper own-demand slope strictly lowers the best-response price.
    for _ in range(200):
        W_d = rng.uniform(0.5, 1.2)
        W_e = W_d + rng.uniform(0.1, 0.6)
        alpha = rng.uniform(0.05, 2.0)
        params = MarketParams(W_e, W_d, alpha, 1.0, rng.uniform(0.5, 2.0))
        doubled = MarketParams(W_e, W_d, 2.0 * alpha, 1.0, params.epsilon)
        n_own, n_opp = rng.uniform(0.05, 0.8, size=2)
        opp_price = rng.uniform(0.0, 0.9 * W_e)
        before = best_response_price(params, EV, n_own, n_opp, opp_price)
        after = best_response_price(doubled, EV, n_own, n_opp, opp_price)
        if not after < before:
            problems.append(f"BR price did not fall: {before} -> {after}")
            break

    # The even endowment split gives the highest consumer surplus across
    # delta in {0.5, ..., 0.9} under profit-chosen capacities.
    params = MarketParams(1.0, 0.9, 1.0, 0.33, 1.0)
    policy = PolicyConfig(0.0, 0.1, 0.0)
    surpluses = {}
    certified = []
    for delta in (0.5, 0.6, 0.7, 0.8, 0.9):
        eq = optimal_capacity_equilibrium(params, policy, delta)
        cs_ev, cs_ice = consumer_surplus(params, eq.capacities, eq.prices, eq.outcome)
        surpluses[delta] = cs_ev + cs_ice
        certified.append((params, eq.capacities, eq.prices))
    for delta in (0.6, 0.7, 0.8, 0.9):
        if not surpluses[0.5] >= surpluses[delta] - 1e-12:
            problems.append(f"CS at even split below delta={delta}")

    # No profitable epsilon-undercut at certified equilibria.
    for _ in range(100):
        W_d = rng.uniform(0.5, 1.2)
        W_e = W_d + rng.uniform(0.1, 0.6)
        params_u = MarketParams(
            W_e, W_d, rng.uniform(0.05, 1.0 / W_e), rng.uniform(0.05, 1.0 / W_d), 1.0
        )
        capacities = naive_mandate_capacities(rng.uniform(0.1, 0.9), rng.uniform(0.2, 0.8))
        certified.append((params_u, capacities, two_price_equilibrium(params_u, capacities)))
    for params_c, capacities, prices in certified:
        if not check_no_profitable_undercut(params_c, capacities, prices):
            problems.append("profitable undercut found at a certified equilibrium")
            break

    ok = not problems
    report(name, ok,
           "equal-split argmax, best-response monotonicity, even-split surplus, "
           "undercut checks all hold" if ok else "; ".join(problems[:3]))
    assert ok, problems


def test_criterion_7_determinism_and_config_rejection(tmp_path, capsys):
    name = "criterion 7 (determinism and config rejection)"
    problems = []

    runs = {
        "mandate": (
            lambda: run_mandate_sweep(load_scenario(
                mandate_config(5.0, "two-price, optimal-single, naive-single", step=0.02)
            )),
            MANDATE_COLUMNS,
        ),
        "monopolist": (
            lambda: run_monopolist_suite(load_scenario(MONO_CONFIG), profile=True),
            MONOPOLIST_COLUMNS,
        ),
    }
    for label, (run, columns) in runs.items():
        first, second = tmp_path / f"{label}_1.csv", tmp_path / f"{label}_2.csv"
        emit_csv(run(), columns, first)
        emit_csv(run(), columns, second)
        if first.read_bytes() != second.read_bytes():
            problems.append(f"{label} rerun differs")

    rejects = [
        ("", MissingKeyError),
        (mandate_config(5.0, "two-price") + "flux = 1\n", UnknownKeyError),
        (mandate_config(5.0, "two-price").replace("W_e = 1.25", "W_e = plenty"),
         MalformedValueError),
        (mandate_config(5.0, "two-price") + "no equals sign here\n", MalformedValueError),
        (mandate_config(5.0, "two-price") + "beta = 2\n", MalformedValueError),
        (MONO_CONFIG.replace("pi = 0.4, 0.33, 0.27", "pi = 0.4, 0.3, 0.2"),
         ConstraintError),
        (mandate_config(5.0, "two-price").replace("W_e = 1.25", "W_e = 0.8"),
         ConstraintError),
        (mandate_config(5.0, "two-price").replace("sweep_step = 0.01", "sweep_step = 0"),
         ConstraintError),
        (mandate_config(5.0, "two-price").replace("delta = 0.6", "delta = 1.5"),
         ConstraintError),
        (MONO_CONFIG + "t = 0.05\n", ConstraintError),
    ]
    for index, (text, expected) in enumerate(rejects):
        path = tmp_path / f"reject_{index}.cfg"
        path.write_text(text)
        code = cli_main(["validate", "--config", str(path)])
        err = capsys.readouterr().err
        if code != 2:
            problems.append(f"config {index}: exit {code}, wanted 2")
        elif not err.startswith(f"{expected.__name__}: "):
            problems.append(f"config {index}: reported {err.splitlines()[0]!r}")

    ok = not problems
    with capsys.disabled():
        report(name, ok,
               "2 scenario reruns byte-identical, 10 bad configs rejected"
               if ok else "; ".join(problems))
    assert ok, problems


def test_annex_two_price_vs_carried_over_ev_price_ordering():
    name = "annex (two-price EV price never below carried-over price, large EV market)"
    scenario = load_scenario(mandate_config(2.0, "two-price, naive-single"))
    rows = run_mandate_sweep(scenario)
    series: dict[str, dict[float, float]] = {"two-price": {}, "naive-single": {}}
    for row in rows:
        if row["avg_price_ev"] is not None:
            series[row["regime"]][round(row["r"], 6)] = row["avg_price_ev"]
    shared = sorted(set(series["two-price"]) & set(series["naive-single"]))
    violations = [
        (r, series["naive-single"][r] - series["two-price"][r])
        for r in shared
        if series["two-price"][r] < series["naive-single"][r] - 1e-9
    ]
    ok = not violations
    if ok:
        report(name, ok, f"{len(shared)} grid points")
    else:
        lo, hi = violations[0][0], violations[-1][0]
        report(name, ok,
               f"ordering fails on r in [{lo:.2f}, {hi:.2f}], "
               f"max gap {max(g for _, g in violations):.2e}")
    assert ok, (
        "two-price average EV price dips below the carried-over price "
        f"at {len(violations)} grid points: {violations[:3]}..."
    )
