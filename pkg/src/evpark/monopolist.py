"""A single firm converting parking spots to chargers under uncertain EV demand.

The firm owns all spots (total mass 1) and converts a share N_e to charging
before the size of the EV market is known.  EV demand takes one of n values
q_1 < ... < q_n with probabilities pi_i; q_i is the mass of EV drivers who
would pay up to W_e absent congestion.  After demand realises, drivers fill
the chargers until the marginal driver's surplus W_e - eps*q/N_e - c hits
zero or the whole realised market q_i is served:

    served(c, q_i) = min(N_e * (W_e - c) / eps, q_i)

The ICE side is deterministic: regular spots 1 - N_e sell at the monopoly
price W_d / 2 for revenue (1 - N_e) * W_d^2 / (4 * eps).  Conversion costs
p per spot net of any subsidy.

Because served demand is a min, the optimal EV price at a fixed N_e falls
into one of three patterns:

* target: serve exactly some realisation q_t whenever demand is at least
  q_t (price W_e - eps*q_t/N_e),
* between: the unconstrained monopoly price lands strictly between two
  adjacent realisations (price W_e/2 + a correction for the states that
  cap out),
* below: the unconstrained price W_e/2 serves less than q_1 in every state.

When EV value is high enough relative to the smallest market and to the
conversion cost, the optimum is always a target pattern and the best
capacity for each target has a closed form; the solver uses those
candidates and always cross-checks against a dense grid search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class InfeasibleCaseError(ValueError):
    """The requested pricing pattern cannot occur at this capacity."""


@dataclass(frozen=True)
class MonopolistParams:
    """Willingness to pay, congestion scale, and net conversion cost."""

    W_e: float
    W_d: float
    epsilon: float
    p: float

    def __post_init__(self) -> None:
        for name in ("W_e", "W_d", "epsilon"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be strictly positive and finite, got {value!r}")
        if not self.W_e > self.W_d:
            raise ValueError(
                f"EV willingness to pay must exceed ICE willingness to pay "
                f"(W_e={self.W_e}, W_d={self.W_d})"
            )
        if not (math.isfinite(self.p) and self.p >= 0.0):
            raise ValueError(f"net conversion cost p must be nonnegative, got {self.p!r}")


@dataclass(frozen=True)
class DemandDistribution:
    """Discrete distribution of the EV market size.

    Realisations must be strictly increasing and positive; probabilities
    strictly positive and summing to 1 (within 1e-12).
    """

    q: tuple[float, ...]
    pi: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "pi", tuple(float(v) for v in self.pi))
        if len(self.q) == 0:
            raise ValueError("demand distribution needs at least one realisation")
        if len(self.q) != len(self.pi):
            raise ValueError(
                f"q and pi must have equal length, got {len(self.q)} and {len(self.pi)}"
            )
        for v in self.q:
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"demand realisations must be positive and finite, got {v}")
        for i in range(1, len(self.q)):
            if not self.q[i] > self.q[i - 1]:
                raise ValueError(
                    f"demand realisations must be strictly increasing, "
                    f"got {self.q[i - 1]} before {self.q[i]}"
                )
        for w in self.pi:
            if not (math.isfinite(w) and w > 0.0):
                raise ValueError(f"probabilities must be strictly positive, got {w}")
        total = math.fsum(self.pi)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1 within 1e-12, got {total!r}")

    def __len__(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class PricingCase:
    """Which demand pattern the EV price induces.

    kind "target": serve exactly realisation t in every state with demand
    at least q_t.  kind "between": served demand falls strictly between
    realisations t and t+1.  kind "below": all states serve less than q_1.
    Targets are 1-based.
    """

    kind: Literal["target", "between", "below"]
    t: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("target", "between", "below"):
            raise ValueError(f"unknown pricing case kind {self.kind!r}")
        if self.kind == "below":
            if self.t is not None:
                raise ValueError("'below' case takes no target index")
        else:
            if not isinstance(self.t, int) or self.t < 1:
                raise ValueError(f"{self.kind} case needs a 1-based target index, got {self.t!r}")

    def label(self) -> str:
        return self.kind if self.t is None else f"{self.kind}-{self.t}"


@dataclass(frozen=True)
class MonopolistSolution:
    """Optimal capacity share with its price pattern and expected profit."""

    N_e: float
    case: PricingCase
    price_ev: float
    price_ice: float
    expected_profit: float
    theorem_holds: bool
    used_closed_form: bool
    oracle_gap: float


@dataclass(frozen=True)
class TheoremAssumptions:
    """The two printed sufficient conditions for the target-pattern optimum.

    price_condition: W_e / 2 > eps * q_1 (the EV premium is large relative
    to congestion at the smallest market).  cost_condition:
    (4 / eps) * (W_e^2 - W_d^2) > p (conversion is cheap relative to the
    EV revenue advantage).
    """

    price_condition: bool
    cost_condition: bool

    @property
    def both(self) -> bool:
        return self.price_condition and self.cost_condition


def verify_theorem_assumptions(
    params: MonopolistParams, dist: DemandDistribution
) -> TheoremAssumptions:
    """Evaluate the sufficient conditions for a closed-form optimum."""
    return TheoremAssumptions(
        price_condition=params.W_e / 2.0 > params.epsilon * dist.q[0],
        cost_condition=(4.0 / params.epsilon) * (params.W_e**2 - params.W_d**2) > params.p,
    )


def ice_price_and_revenue(params: MonopolistParams, N_e: float) -> tuple[float, float]:
    """Monopoly price and revenue on the regular spots 1 - N_e.

        m* = W_d / 2,    revenue = (1 - N_e) * W_d^2 / (4 * eps)
    """
    if not 0.0 <= N_e <= 1.0:
        raise ValueError(f"N_e must lie in [0, 1], got {N_e}")
    return params.W_d / 2.0, (1.0 - N_e) * params.W_d**2 / (4.0 * params.epsilon)


def ev_demand(params: MonopolistParams, N_e: float, c: float, q_max: float) -> float:
    """Charger demand at price c in a state with realised market q_max."""
    if N_e <= 0.0:
        return 0.0
    return min(N_e * (params.W_e - c) / params.epsilon, q_max)


def _check_target(dist: DemandDistribution, t: int, *, allow_last: bool) -> None:
    n = len(dist)
    hi = n if allow_last else n - 1
    if not isinstance(t, int) or not 1 <= t <= hi:
        raise ValueError(f"target index must lie in 1..{hi}, got {t!r}")


def case1_price(params: MonopolistParams, dist: DemandDistribution, N_e: float, t: int) -> float:
    """Price that serves exactly q_t whenever demand reaches it.

        c = W_e - eps * q_t / N_e

    Feasible as a price only when nonnegative, i.e. N_e >= eps*q_t/W_e.
    """
    _check_target(dist, t, allow_last=True)
    if N_e <= 0.0:
        raise ValueError(f"N_e must be strictly positive, got {N_e}")
    return params.W_e - params.epsilon * dist.q[t - 1] / N_e


def case2_price(
    params: MonopolistParams, dist: DemandDistribution, N_e: float, t: int
) -> float | None:
    """Unconstrained-optimal price when states up to t cap out, or None.

        c = W_e / 2 + eps * sum_{i<=t} pi_i q_i / (2 * sum_{j>t} pi_j * N_e)

    Feasible only if the served quantity N_e*(W_e - c)/eps then falls
    strictly inside (q_t, q_{t+1}); otherwise the pattern is inconsistent
    and None is returned.
    """
    _check_target(dist, t, allow_last=False)
    if N_e <= 0.0:
        raise ValueError(f"N_e must be strictly positive, got {N_e}")
    capped = sum(dist.pi[i] * dist.q[i] for i in range(t))
    tail = sum(dist.pi[i] for i in range(t, len(dist)))
    c = params.W_e / 2.0 + params.epsilon * capped / (2.0 * tail * N_e)
    served = N_e * (params.W_e - c) / params.epsilon
    if not dist.q[t - 1] < served < dist.q[t]:
        return None
    return c


def case3_price(params: MonopolistParams, dist: DemandDistribution, N_e: float) -> float | None:
    """Unconstrained monopoly price when no state caps out, or None.

    c = W_e / 2 is consistent only if the served mass N_e*W_e/(2*eps)
    stays strictly below the smallest realisation q_1.
    """
    if N_e < 0.0:
        raise ValueError(f"N_e must be nonnegative, got {N_e}")
    served = N_e * params.W_e / (2.0 * params.epsilon)
    if not served < dist.q[0]:
        return None
    return params.W_e / 2.0


def _case_price(params, dist, N_e, case: PricingCase) -> float:
    """Price for a case, raising InfeasibleCaseError when inconsistent."""
    if case.kind == "below":
        c = case3_price(params, dist, N_e)
        if c is None:
            raise InfeasibleCaseError(
                f"price W_e/2 would serve at least q_1 at N_e={N_e}; 'below' infeasible"
            )
        return c
    if case.kind == "between":
        c = case2_price(params, dist, N_e, case.t)
        if c is None:
            raise InfeasibleCaseError(
                f"served demand leaves the ({case.t}, {case.t + 1}) window at N_e={N_e}"
            )
        return c
    c = case1_price(params, dist, N_e, case.t)
    if c < 0.0:
        raise InfeasibleCaseError(
            f"serving q_{case.t} at N_e={N_e} would need a negative price"
        )
    return c


def expected_profit(
    params: MonopolistParams, dist: DemandDistribution, N_e: float, case: PricingCase
) -> float:
    """Expected profit at capacity N_e pricing according to the given case.

    Demand in each state comes from :func:`ev_demand` at the case's price;
    the ICE side always earns its monopoly revenue; conversion costs
    p * N_e.

    Raises:
        InfeasibleCaseError: if the case's pattern cannot occur at N_e.
    """
    if not 0.0 <= N_e <= 1.0:
        raise ValueError(f"N_e must lie in [0, 1], got {N_e}")
    if N_e == 0.0:
        if case.kind != "below":
            raise InfeasibleCaseError("only the 'below' pattern is possible with no chargers")
        _, ice = ice_price_and_revenue(params, N_e)
        return ice
    c = _case_price(params, dist, N_e, case)
    ev_revenue = c * sum(
        dist.pi[i] * ev_demand(params, N_e, c, dist.q[i]) for i in range(len(dist))
    )
    _, ice = ice_price_and_revenue(params, N_e)
    return ev_revenue + ice - params.p * N_e


def optimal_capacity_case1(
    params: MonopolistParams, dist: DemandDistribution, t: int
) -> float:
    """Best capacity for serving target q_t, from the first-order condition.

    With R = sum_{i<=t} pi_i q_i + sum_{j>t} pi_j q_t (expected served mass)
    and D = W_d^2/(4*eps) + p (the opportunity cost of a charger spot),

        N_e*(t) = min(1, sqrt(eps * q_t * R / D))
    """
    _check_target(dist, t, allow_last=True)
    q_t = dist.q[t - 1]
    R = sum(dist.pi[i] * min(dist.q[i], q_t) for i in range(len(dist)))
    D = params.W_d**2 / (4.0 * params.epsilon) + params.p
    return min(1.0, math.sqrt(params.epsilon * q_t * R / D))


def _grid_best(params: MonopolistParams, dist: DemandDistribution, grid: np.ndarray):
    """Vectorised best-case expected profit over a grid of capacities.

    Returns (profit, kind_code, target) arrays; kind codes are
    0 = below, 1 = target, 2 = between.  Ties keep the pattern serving the
    smaller quantity (the order below is by served mass).
    """
    eps = params.epsilon
    W_e = params.W_e
    q = np.asarray(dist.q)
    pi = np.asarray(dist.pi)
    n = len(q)

    ice = (1.0 - grid) * params.W_d**2 / (4.0 * eps) - params.p * grid
    positive = grid > 0.0
    safe = np.where(positive, grid, 1.0)

    best = np.full(grid.shape, -np.inf)
    kind = np.zeros(grid.shape, dtype=int)
    target = np.zeros(grid.shape, dtype=int)

    def consider(revenue, feasible, k, t):
        nonlocal best, kind, target
        improve = feasible & (revenue > best)
        best = np.where(improve, revenue, best)
        kind = np.where(improve, k, kind)
        target = np.where(improve, t, target)

    # below: price W_e/2, served N_e*W_e/(2*eps) in every state.
    served3 = grid * W_e / (2.0 * eps)
    consider(0.5 * W_e * served3, served3 < q[0], 0, 0)

    cum = np.cumsum(pi * q)
    tail = 1.0 - np.cumsum(pi)
    for t in range(1, n + 1):
        q_t = q[t - 1]
        # target t: c = W_e - eps*q_t/N_e, expected served R_t.
        R_t = cum[t - 1] + (tail[t - 1] * q_t if t < n else 0.0)
        c1 = W_e - eps * q_t / safe
        consider(c1 * R_t, positive & (c1 >= 0.0), 1, t)
        if t < n:
            # between t and t+1: states up to t cap out.
            c2 = W_e / 2.0 + eps * cum[t - 1] / (2.0 * tail[t - 1] * safe)
            served2 = safe * (W_e - c2) / eps
            expected2 = cum[t - 1] + tail[t - 1] * served2
            consider(
                c2 * expected2,
                positive & (served2 > q_t) & (served2 < q[t]),
                2,
                t,
            )
    return best + ice, kind, target


_KIND_NAMES = {0: "below", 1: "target", 2: "between"}


@dataclass(frozen=True)
class OracleResult:
    """Grid-search benchmark: refined maximiser and raw grid maximum."""

    N_e: float
    expected_profit: float
    case: PricingCase
    grid_profit: float


def _case_from_codes(kind_code: int, t: int) -> PricingCase:
    name = _KIND_NAMES[int(kind_code)]
    return PricingCase(name, int(t) if name != "below" else None)


def _best_case_at(params, dist, N_e) -> tuple[float, PricingCase]:
    grid = np.asarray([N_e], dtype=float)
    profit, kind, target = _grid_best(params, dist, grid)
    return float(profit[0]), _case_from_codes(kind[0], target[0])


def grid_oracle(
    params: MonopolistParams,
    dist: DemandDistribution,
    resolution: float = 1e-4,
    refine: bool = True,
) -> OracleResult:
    """Brute-force profit maximisation over an even capacity grid.

    Scans N_e in [0, 1] at the given resolution, then (optionally) refines
    around the best grid point with a golden-section pass.  This is the
    independent check the closed-form solver is validated against.
    """
    if not 0.0 < resolution <= 0.1:
        raise ValueError(f"resolution must lie in (0, 0.1], got {resolution}")
    steps = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, steps + 1)
    profit, kind, target = _grid_best(params, dist, grid)
    k = int(np.flatnonzero(profit >= profit.max() - 1e-12)[0])
    grid_profit = float(profit[k])
    best_n = float(grid[k])
    best_profit = grid_profit
    if refine:
        lo = float(grid[max(k - 1, 0)])
        hi = float(grid[min(k + 1, steps)])
        a, b = lo, hi
        c = a + _INV_PHI2 * (b - a)
        d = a + _INV_PHI * (b - a)
        fc = _best_case_at(params, dist, c)[0]
        fd = _best_case_at(params, dist, d)[0]
        while b - a > 1e-8:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = a + _INV_PHI2 * (b - a)
                fc = _best_case_at(params, dist, c)[0]
            else:
                a, c, fc = c, d, fd
                d = a + _INV_PHI * (b - a)
                fd = _best_case_at(params, dist, d)[0]
        for x, fx in ((c, fc), (d, fd)):
            if fx > best_profit:
                best_n, best_profit = float(x), float(fx)
    final_profit, case = _best_case_at(params, dist, best_n)
    return OracleResult(best_n, final_profit, case, grid_profit)


def profit_profile(
    params: MonopolistParams,
    dist: DemandDistribution,
    resolution: float = 1e-3,
) -> tuple[np.ndarray, np.ndarray, list[PricingCase]]:
    """Best-case expected profit across an even capacity grid.

    Returns (grid, profit, cases): at each grid capacity, the profit of the
    best feasible pricing pattern and which pattern that is.  Used for
    profile output and figures.
    """
    if not 0.0 < resolution <= 0.1:
        raise ValueError(f"resolution must lie in (0, 0.1], got {resolution}")
    steps = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, steps + 1)
    profit, kind, target = _grid_best(params, dist, grid)
    cases = [_case_from_codes(k, t) for k, t in zip(kind, target)]
    return grid, profit, cases


def solve_monopolist(
    params: MonopolistParams,
    dist: DemandDistribution,
    oracle_resolution: float = 1e-4,
) -> MonopolistSolution:
    """Optimal conversion share, price pattern, and expected profit.

    When the sufficient conditions hold, evaluates the closed-form
    candidate capacity for every target realisation and keeps the best
    (ties to the smaller capacity).  The grid oracle always runs; if it
    beats the closed form (possible only when the printed conditions are
    weaker than the theory actually requires), its refined answer is
    returned instead and ``used_closed_form`` is False.
    """
    assumptions = verify_theorem_assumptions(params, dist)
    oracle = grid_oracle(params, dist, oracle_resolution, refine=True)

    best: tuple[float, float, int] | None = None  # (profit, N_e, t)
    if assumptions.both:
        for t in range(1, len(dist) + 1):
            n_t = optimal_capacity_case1(params, dist, t)
            if n_t <= 0.0 or case1_price(params, dist, n_t, t) < 0.0:
                continue
            profit = expected_profit(params, dist, n_t, PricingCase("target", t))
            if best is None or profit > best[0] + 1e-12 or (
                abs(profit - best[0]) <= 1e-12 and n_t < best[1]
            ):
                best = (profit, n_t, t)

    m_star = params.W_d / 2.0
    if best is not None and best[0] >= oracle.expected_profit - 1e-9:
        profit, n_star, t = best
        return MonopolistSolution(
            N_e=n_star,
            case=PricingCase("target", t),
            price_ev=case1_price(params, dist, n_star, t),
            price_ice=m_star,
            expected_profit=profit,
            theorem_holds=assumptions.both,
            used_closed_form=True,
            oracle_gap=profit - oracle.grid_profit,
        )
    price = _case_price(params, dist, oracle.N_e, oracle.case) if oracle.N_e > 0.0 else m_star
    return MonopolistSolution(
        N_e=oracle.N_e,
        case=oracle.case,
        price_ev=price if oracle.N_e > 0.0 else float("nan"),
        price_ice=m_star,
        expected_profit=oracle.expected_profit,
        theorem_holds=assumptions.both,
        used_closed_form=False,
        oracle_gap=oracle.expected_profit - oracle.grid_profit,
    )
