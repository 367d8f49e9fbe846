"""First-stage capacity choice: how many spots each firm converts to charging.

The government sets a mandate r (a floor: at least a share r of each firm's
endowment must offer charging), a conversion cost t per charger spot, and a
subsidy s <= t, leaving firms a net cost p = t - s per spot.  Under the
"naive mandate" regime firms build exactly the floor.  Under the optimal
regime each firm picks its charger capacity in [r*N_i, N_i] to maximise
profit, anticipating the second-stage price equilibrium; the subgame-perfect
profile is found by alternating best responses.

Each best response is computed by a vectorised grid pre-scan that brackets
the maximiser, followed by golden-section refinement.  Outside the parameter
region where the capacity game is known to be well behaved for two-price
competition (alpha*W_e <= 1, beta*W_d <= 1, epsilon = 1) the pre-scan falls
back to a much denser grid, and a warning flags that the result may be one
of several equilibria.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .market import (
    CapacityProfile,
    MarketParams,
    PriceProfile,
    WardropOutcome,
    _check_firm,
    _class_quantities_array,
    wardrop_quantities,
)
from .pricing import (
    PricingRegime,
    _naive_single_pair,
    _optimal_single_vec,
    _two_price_pair,
    naive_single_price,
    optimal_single_price_equilibrium,
    two_price_equilibrium,
)
from .welfare import realized_profit

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class EquilibriumConditionsWarning(UserWarning):
    """The capacity game was solved outside its known good-behaviour region."""


class CapacityConvergenceError(RuntimeError):
    """Alternating best responses failed to settle.

    Attributes:
        history: the last few (N_e1, N_e2) iterates, oldest first.
    """

    def __init__(self, history: list[tuple[float, float]], rounds: int):
        self.history = history
        self.rounds = rounds
        tail = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in history[-4:])
        super().__init__(
            f"capacity best responses did not converge in {rounds} rounds; "
            f"recent iterates: {tail}"
        )


@dataclass(frozen=True)
class PolicyConfig:
    """Government instruments: mandate floor r, conversion cost t, subsidy s."""

    r: float
    t: float
    s: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"mandate share r must lie in [0, 1], got {self.r}")
        if self.t < 0.0:
            raise ValueError(f"conversion cost t must be nonnegative, got {self.t}")
        if not 0.0 <= self.s <= self.t:
            raise ValueError(
                f"subsidy s must satisfy 0 <= s <= t, got s={self.s}, t={self.t}"
            )

    @property
    def p(self) -> float:
        """Net cost per charger-equipped spot, t - s."""
        return self.t - self.s


class CapacityRegime(enum.Enum):
    """How first-stage capacities are determined."""

    NAIVE_MANDATE = "naive-mandate"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class CapacityEquilibrium:
    """Solved capacity game: profile plus the induced second-stage outcome."""

    capacities: CapacityProfile
    prices: PriceProfile
    outcome: WardropOutcome
    profits: tuple[float, float]
    rounds: int


def naive_mandate_capacities(r: float, delta: float) -> CapacityProfile:
    """Profile when both firms convert exactly the mandated share r."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mandate share r must lie in [0, 1], got {r}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    return CapacityProfile.from_ev_split(delta, r * delta, r * (1.0 - delta))


def regime_prices(
    params: MarketParams, capacities: CapacityProfile, regime: PricingRegime
) -> PriceProfile:
    """Second-stage equilibrium prices under the given pricing regime."""
    if regime is PricingRegime.TWO_PRICE:
        return two_price_equilibrium(params, capacities)
    if regime is PricingRegime.NAIVE_SINGLE:
        return naive_single_price(params, capacities.delta)
    return optimal_single_price_equilibrium(params, capacities)


def firm_profit(
    params: MarketParams,
    capacities: CapacityProfile,
    regime: PricingRegime,
    p: float,
    firm: int,
) -> float:
    """One firm's profit at the second-stage equilibrium induced by capacities."""
    _check_firm(firm)
    prices = regime_prices(params, capacities, regime)
    outcome = wardrop_quantities(params, capacities, prices)
    return realized_profit(capacities, prices, outcome, p, firm)


def _profit_on_grid(
    params: MarketParams,
    delta: float,
    regime: PricingRegime,
    p: float,
    firm: int,
    ne_own: np.ndarray,
    ne_opp: float,
) -> np.ndarray:
    """Vectorised own-profit over a grid of own charger capacities."""
    N1 = delta
    N2 = 1.0 - delta
    if firm == 1:
        ne1, ne2 = ne_own, np.full_like(ne_own, ne_opp)
    else:
        ne1, ne2 = np.full_like(ne_own, ne_opp), ne_own
    nd1 = np.maximum(N1 - ne1, 0.0)
    nd2 = np.maximum(N2 - ne2, 0.0)

    eps = params.epsilon
    if regime is PricingRegime.TWO_PRICE:
        c1 = _two_price_pair(params.W_e, params.alpha, eps, ne1, ne2)
        c2 = _two_price_pair(params.W_e, params.alpha, eps, ne2, ne1)
        m1 = _two_price_pair(params.W_d, params.beta, eps, nd1, nd2)
        m2 = _two_price_pair(params.W_d, params.beta, eps, nd2, nd1)
    elif regime is PricingRegime.NAIVE_SINGLE:
        if delta == 0.0 or delta == 1.0:
            mono = params.W_d / 2.0
            base1 = mono if delta == 1.0 else 0.0
            base2 = mono if delta == 0.0 else 0.0
        else:
            base1, base2 = _naive_single_pair(params, delta, eps)
        c1 = m1 = np.full_like(ne_own, base1)
        c2 = m2 = np.full_like(ne_own, base2)
    else:
        m1, m2 = _optimal_single_vec(params, ne1, ne2, nd1, nd2)
        c1, c2 = m1, m2

    q_e1, q_e2 = _class_quantities_array(params.W_e, params.alpha, eps, ne1, ne2, c1, c2)
    q_d1, q_d2 = _class_quantities_array(params.W_d, params.beta, eps, nd1, nd2, m1, m2)
    if firm == 1:
        profit = c1 * q_e1 + m1 * q_d1 - p * ne1
    else:
        profit = c2 * q_e2 + m2 * q_d2 - p * ne2
    return np.where(np.isnan(profit), -np.inf, profit)


def _profit_scalar(params, delta, regime, p, firm, ne_own, ne_opp) -> float:
    """Scalar own-profit at one candidate capacity (used inside golden section)."""
    if firm == 1:
        capacities = CapacityProfile.from_ev_split(delta, ne_own, ne_opp)
    else:
        capacities = CapacityProfile.from_ev_split(delta, ne_opp, ne_own)
    return firm_profit(params, capacities, regime, p, firm)


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section maximisation of a unimodal f on [lo, hi].

    Ties between probe values keep the left subinterval, biasing the
    answer toward the smaller argument.
    """
    best_x, best_f = lo, f(lo)
    f_hi = f(hi)
    if f_hi > best_f:
        best_x, best_f = hi, f_hi
    a, b = lo, hi
    c = a + _INV_PHI2 * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = a + _INV_PHI2 * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _conditions_hold(params: MarketParams, regime: PricingRegime) -> bool:
    """Whether the capacity game is inside its known good-behaviour region."""
    if regime is PricingRegime.NAIVE_SINGLE:
        return True
    return (
        params.alpha * params.W_e <= 1.0
        and params.beta * params.W_d <= 1.0
        and params.epsilon == 1.0
    )


def _best_response_capacity(
    params, policy, delta, regime, firm, ne_opp, seed_points, tol
) -> float:
    N_i = delta if firm == 1 else 1.0 - delta
    lo = policy.r * N_i
    hi = N_i
    if hi - lo <= tol:
        return lo
    grid = np.linspace(lo, hi, seed_points)
    values = _profit_on_grid(params, delta, regime, policy.p, firm, grid, ne_opp)
    best = values.max()
    k = int(np.flatnonzero(values >= best - 1e-12)[0])
    b_lo = float(grid[max(k - 1, 0)])
    b_hi = float(grid[min(k + 1, seed_points - 1)])
    x, fx = _golden_max(
        lambda ne: _profit_scalar(params, delta, regime, policy.p, firm, ne, ne_opp),
        b_lo,
        b_hi,
        tol,
    )
    # Prefer the smallest capacity among candidates within rounding of optimal.
    candidates = [(fx, x), (float(values[k]), float(grid[k]))]
    top = max(v for v, _ in candidates)
    x_star = min(xc for v, xc in candidates if v >= top - 1e-12)
    return min(max(x_star, lo), hi)


def capacity_deviation_improvement(
    params: MarketParams,
    policy: PolicyConfig,
    delta: float,
    regime: PricingRegime,
    N_e1: float,
    N_e2: float,
    points: int = 101,
) -> float:
    """Best profit gain from a unilateral capacity deviation on a grid.

    For each firm in turn, scans ``points`` evenly spaced charger
    capacities across its feasible interval [r*N_i, N_i] (rival held fixed)
    and reports the largest improvement over the candidate profile's
    profit.  At an equilibrium this should not exceed solver tolerance.
    """
    best = 0.0
    for firm, own, opp in ((1, N_e1, N_e2), (2, N_e2, N_e1)):
        N_i = delta if firm == 1 else 1.0 - delta
        lo, hi = policy.r * N_i, N_i
        if hi - lo <= 0.0:
            continue
        base = _profit_scalar(params, delta, regime, policy.p, firm,
                              min(max(own, lo), hi), opp)
        grid = np.linspace(lo, hi, points)
        values = _profit_on_grid(params, delta, regime, policy.p, firm, grid, opp)
        best = max(best, float(values.max() - base))
    return best


def optimal_capacity_equilibrium(
    params: MarketParams,
    policy: PolicyConfig,
    delta: float,
    regime: PricingRegime = PricingRegime.TWO_PRICE,
    *,
    allow_unsupported_pricing: bool = False,
    max_rounds: int = 500,
    round_tol: float = 1e-7,
    search_tol: float = 1e-8,
    initial: tuple[float, float] | None = None,
) -> CapacityEquilibrium:
    """Subgame-perfect capacity profile under profit-maximising conversion.

    Alternates exact best responses (grid pre-scan plus golden-section
    refinement to ``search_tol``) until the profile moves by less than
    ``round_tol`` in either coordinate.  Ties in a best response go to the
    smaller charger capacity.

    Args:
        params: market parameters.
        policy: mandate floor and cost/subsidy; firms face net cost policy.p.
        delta: firm 1's endowment share.
        regime: second-stage pricing.  Two-price and naive-single are
            supported; optimal-single has no equilibrium theory backing it
            here and requires ``allow_unsupported_pricing=True``.
        allow_unsupported_pricing: opt in to the unsupported regime.
        max_rounds: bound on best-response rounds.
        round_tol: convergence tolerance on the profile, max-norm.
        search_tol: interval width tolerance of each best-response search.
        initial: starting (N_e1, N_e2); defaults to the mandate floor.

    Raises:
        ValueError: for the unsupported regime without the opt-in flag.
        CapacityConvergenceError: if best responses do not settle.

    Warns:
        EquilibriumConditionsWarning: outside the known good-behaviour
            region (or whenever the unsupported regime is used).
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if regime is PricingRegime.OPTIMAL_SINGLE and not allow_unsupported_pricing:
        raise ValueError(
            "optimal-single pricing has no capacity-equilibrium support; "
            "pass allow_unsupported_pricing=True to search anyway"
        )
    conditions = _conditions_hold(params, regime)
    if regime is PricingRegime.OPTIMAL_SINGLE or not conditions:
        warnings.warn(
            "capacity game outside its known good-behaviour region "
            "(need alpha*W_e <= 1, beta*W_d <= 1, epsilon == 1 for two-price "
            "pricing); the result may be one of several equilibria",
            EquilibriumConditionsWarning,
            stacklevel=2,
        )
    seed_points = 101 if conditions else 1001

    N1, N2 = delta, 1.0 - delta
    if initial is not None:
        ne1, ne2 = initial
        ne1 = min(max(ne1, policy.r * N1), N1)
        ne2 = min(max(ne2, policy.r * N2), N2)
    else:
        ne1, ne2 = policy.r * N1, policy.r * N2
    history = [(ne1, ne2)]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        prev = (ne1, ne2)
        ne1 = _best_response_capacity(
            params, policy, delta, regime, 1, ne2, seed_points, search_tol
        )
        ne2 = _best_response_capacity(
            params, policy, delta, regime, 2, ne1, seed_points, search_tol
        )
        history.append((ne1, ne2))
        if max(abs(ne1 - prev[0]), abs(ne2 - prev[1])) < round_tol:
            break
    else:
        raise CapacityConvergenceError(history[-10:], max_rounds)

    capacities = CapacityProfile.from_ev_split(delta, ne1, ne2)
    prices = regime_prices(params, capacities, regime)
    outcome = wardrop_quantities(params, capacities, prices)
    profits = (
        realized_profit(capacities, prices, outcome, policy.p, 1),
        realized_profit(capacities, prices, outcome, policy.p, 2),
    )
    return CapacityEquilibrium(capacities, prices, outcome, profits, rounds)
