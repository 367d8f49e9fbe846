"""Second-stage price competition, given capacities.

Three regimes are supported:

* two-price: each firm posts separate prices for charger-equipped and
  regular spots.  The classes decouple and each class has a closed-form
  Bertrand-style equilibrium.
* optimal single price: each firm posts one price covering both spot types
  and best-responds to its rival.  The best-response map is closed form but
  the fixed point is not, so it is found by damped iteration.
* naive single price: both firms keep the single price that was optimal
  before any charging capacity existed (the ICE-only closed form evaluated
  at the firms' total endowments).  This is a behavioural benchmark, not a
  best response to the actual market.

Throughout, capacities enter through N / epsilon; a zero capacity simply
removes that side of the market from the formulas.
"""
from __future__ import annotations

import enum

import numpy as np

from .market import (
    EV,
    ICE,
    CapacityProfile,
    MarketParams,
    PriceProfile,
    _check_firm,
    _class_quantities_array,
    wardrop_quantities,
)


class PricingRegime(enum.Enum):
    """How firms set prices in the second stage."""

    TWO_PRICE = "two-price"
    OPTIMAL_SINGLE = "optimal-single"
    NAIVE_SINGLE = "naive-single"


class PriceConvergenceError(RuntimeError):
    """Damped fixed-point iteration for single prices failed to converge.

    Attributes:
        last_iterate: the (m1, m2) pair at the final iteration.
        residual: max |BR_i(m) - m_i| at the final iteration.
    """

    def __init__(self, last_iterate: tuple[float, float], residual: float, iterations: int):
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"single-price fixed point did not reach tolerance after {iterations} "
            f"iterations (last iterate {last_iterate}, residual {residual:.3e})"
        )


def _two_price_pair(W, slope, eps, n_own, n_opp):
    """Closed-form equilibrium price of the own firm for one class.

    With n = N / epsilon for each firm,

        c_own = (2*slope*W^2*n_own + slope*W^2*n_opp + 2*W)
                / (3*slope^2*W^2*n_own*n_opp + 4*slope*W*(n_own + n_opp) + 4)

    Pure arithmetic: works elementwise on scalars and arrays alike.  With
    n_opp = 0 it collapses to the monopoly price W / 2.
    """
    a = n_own / eps
    b = n_opp / eps
    den = 3.0 * slope**2 * W**2 * a * b + 4.0 * slope * W * (a + b) + 4.0
    return (2.0 * slope * W**2 * a + slope * W**2 * b + 2.0 * W) / den


def two_price_equilibrium(params: MarketParams, capacities: CapacityProfile) -> PriceProfile:
    """Equilibrium prices when firms price the two spot types separately.

    Each class is an independent two-firm pricing game; prices come from
    the closed form in :func:`_two_price_pair`.  A class with no capacity
    at either firm has no market, marked by None for both its prices.
    """
    prices: dict[str, tuple[float | None, float | None]] = {}
    for driver_class in (EV, ICE):
        n1, n2 = capacities.class_pair(driver_class)
        if n1 <= 0.0 and n2 <= 0.0:
            prices[driver_class] = (None, None)
            continue
        W = params.intercept(driver_class)
        slope = params.class_slope(driver_class)
        p1 = float(_two_price_pair(W, slope, params.epsilon, n1, n2))
        p2 = float(_two_price_pair(W, slope, params.epsilon, n2, n1))
        prices[driver_class] = (p1, p2)
    (c1, c2), (m1, m2) = prices[EV], prices[ICE]
    return PriceProfile(c1, c2, m1, m2)


def best_response_price(
    params: MarketParams,
    driver_class: str,
    own_capacity: float,
    opp_capacity: float,
    opp_price: float,
) -> float | None:
    """One firm's optimal class price against a fixed rival price.

        BR = W * (1 + slope * (N_opp / eps) * p_opp)
             / (2 * (slope * W * (N_opp / eps) + 1))

    Returns None when the firm has no capacity for the class (no market to
    price).  With opp_capacity = 0 this is the monopoly price W / 2,
    independent of opp_price.
    """
    if own_capacity <= 0.0:
        return None
    W = params.intercept(driver_class)
    slope = params.class_slope(driver_class)
    b = opp_capacity / params.epsilon
    return W * (1.0 + slope * b * opp_price) / (2.0 * (slope * W * b + 1.0))


def _single_price_coeffs(params, n_own, n_opp, W, slope):
    """Per-class pieces of the single-price best response.

    The firm's revenue from a class, as a function of its own single price
    m and the rival's m_opp, is ((u + v_opp*m_opp) - v*m) * m / A with

        A = slope*W*(1 + n_opp/n_own) + eps/n_own
        u = W,   v_opp = W*slope*n_opp/eps,   v = slope*W*n_opp/eps + 1

    Returns (u/A as a function of m_opp, v/A); the class is skipped when
    the firm has no capacity for it.
    """
    eps = params.epsilon
    A = slope * W * (1.0 + n_opp / n_own) + eps / n_own
    u = W
    v_opp = W * slope * (n_opp / eps)
    v = slope * W * (n_opp / eps) + 1.0
    return A, u, v_opp, v


def _single_price_br(params, capacities, firm, m_opp):
    """Best single price for one firm given the rival's single price."""
    num = 0.0
    den = 0.0
    for driver_class in (EV, ICE):
        n1, n2 = capacities.class_pair(driver_class)
        n_own = n1 if firm == 1 else n2
        n_opp = n2 if firm == 1 else n1
        if n_own <= 0.0:
            continue
        W = params.intercept(driver_class)
        slope = params.class_slope(driver_class)
        A, u, v_opp, v = _single_price_coeffs(params, n_own, n_opp, W, slope)
        num += (u + v_opp * m_opp) / A
        den += v / A
    if den == 0.0:
        return None
    return num / (2.0 * den)


def optimal_single_price_equilibrium(
    params: MarketParams,
    capacities: CapacityProfile,
    tol: float = 1e-10,
    max_iterations: int = 10000,
    damping: float = 0.5,
    initial: tuple[float, float] | None = None,
) -> PriceProfile:
    """Fixed point of the single-price best-response map.

    Starting from (W_d / 2, W_d / 2), iterate

        m_i <- m_i + damping * (BR_i(m_opp) - m_i)

    until max_i |BR_i(m_opp) - m_i| <= tol.  The returned profile uses the
    same price for both spot types of a firm (c_i = m_i); a firm with no
    capacity at all gets the None sentinel for both.

    Raises:
        PriceConvergenceError: if the residual is still above tol after
            max_iterations steps; carries the last iterate for diagnosis.
    """
    alive = [
        capacities.N_e1 > 0.0 or capacities.N_d1 > 0.0,
        capacities.N_e2 > 0.0 or capacities.N_d2 > 0.0,
    ]
    m = list(initial) if initial is not None else [params.W_d / 2.0, params.W_d / 2.0]
    residual = float("inf")
    for _ in range(max_iterations):
        br = [
            _single_price_br(params, capacities, firm, m[2 - firm]) if alive[firm - 1] else None
            for firm in (1, 2)
        ]
        residual = max((abs(br[i] - m[i]) for i in (0, 1) if br[i] is not None), default=0.0)
        if residual <= tol:
            break
        for i in (0, 1):
            if br[i] is not None:
                m[i] += damping * (br[i] - m[i])
    else:
        raise PriceConvergenceError((m[0], m[1]), residual, max_iterations)
    p1 = m[0] if alive[0] else None
    p2 = m[1] if alive[1] else None
    return PriceProfile(p1, p2, p1, p2)


def _optimal_single_vec(params, ne1, ne2, nd1, nd2, tol=1e-10, max_iterations=10000, damping=0.5):
    """Vectorised damped fixed point for single prices over capacity grids.

    Inputs broadcast; returns (m1, m2) arrays.  Entries that fail to
    converge are returned as nan.
    """
    ne1, ne2, nd1, nd2 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (ne1, ne2, nd1, nd2))
    )
    eps = params.epsilon
    shape = ne1.shape

    def pieces(W, slope, n_own, n_opp):
        has = n_own > 0.0
        safe = np.where(has, n_own, 1.0)
        A = slope * W * (1.0 + n_opp / safe) + eps / safe
        u = np.where(has, W / A, 0.0)
        v_opp = np.where(has, W * slope * (n_opp / eps) / A, 0.0)
        v = np.where(has, (slope * W * (n_opp / eps) + 1.0) / A, 0.0)
        return u, v_opp, v

    u1 = np.zeros(shape)
    w1 = np.zeros(shape)
    d1 = np.zeros(shape)
    u2 = np.zeros(shape)
    w2 = np.zeros(shape)
    d2 = np.zeros(shape)
    for W, slope, n1, n2 in (
        (params.W_e, params.alpha, ne1, ne2),
        (params.W_d, params.beta, nd1, nd2),
    ):
        a_u, a_w, a_v = pieces(W, slope, n1, n2)
        u1 += a_u
        w1 += a_w
        d1 += a_v
        b_u, b_w, b_v = pieces(W, slope, n2, n1)
        u2 += b_u
        w2 += b_w
        d2 += b_v

    alive1 = d1 > 0.0
    alive2 = d2 > 0.0
    sd1 = np.where(alive1, d1, 1.0)
    sd2 = np.where(alive2, d2, 1.0)
    m1 = np.full(shape, params.W_d / 2.0)
    m2 = np.full(shape, params.W_d / 2.0)
    converged = False
    for _ in range(max_iterations):
        br1 = (u1 + w1 * m2) / (2.0 * sd1)
        br2 = (u2 + w2 * m1) / (2.0 * sd2)
        r1 = np.where(alive1, np.abs(br1 - m1), 0.0)
        r2 = np.where(alive2, np.abs(br2 - m2), 0.0)
        if max(r1.max(initial=0.0), r2.max(initial=0.0)) <= tol:
            converged = True
            break
        m1 = np.where(alive1, m1 + damping * (br1 - m1), m1)
        m2 = np.where(alive2, m2 + damping * (br2 - m2), m2)
    if not converged:
        bad = (np.where(alive1, np.abs(br1 - m1), 0.0) > tol) | (
            np.where(alive2, np.abs(br2 - m2), 0.0) > tol
        )
        m1 = np.where(bad, np.nan, m1)
        m2 = np.where(bad, np.nan, m2)
    m1 = np.where(alive1, m1, np.nan)
    m2 = np.where(alive2, m2, np.nan)
    return m1, m2


def _naive_single_pair(params: MarketParams, delta: float, eps: float) -> tuple[float, float]:
    """ICE-only closed form at total endowments N_1 = delta, N_2 = 1 - delta."""
    W = params.W_d
    slope = params.beta
    a = delta / eps
    b = (1.0 - delta) / eps
    den = 3.0 * slope**2 * W**2 * a * b + 4.0 * slope * W * a + 4.0 * slope * W * b + 4.0
    m1 = (2.0 * slope * W**2 * a + slope * W**2 * b + 2.0 * W) / den
    m2 = (2.0 * slope * W**2 * b + slope * W**2 * a + 2.0 * W) / den
    return m1, m2


def naive_single_price(
    params: MarketParams, delta: float, epsilon: float | None = None
) -> PriceProfile:
    """Single prices carried over from the pre-charging market.

    Both spot types at firm i sell at the equilibrium parking price of an
    ICE-only market where the firms' capacities are their full endowments
    delta and 1 - delta.  The result is independent of any mandate or of
    how spots are actually split.  With delta in {0, 1} the surviving firm
    charges the monopoly price W_d / 2 and the other side is None.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    eps = params.epsilon if epsilon is None else epsilon
    if eps <= 0.0:
        raise ValueError(f"epsilon must be strictly positive, got {eps}")
    if delta == 0.0:
        m = params.W_d / 2.0
        return PriceProfile(None, m, None, m)
    if delta == 1.0:
        m = params.W_d / 2.0
        return PriceProfile(m, None, m, None)
    m1, m2 = _naive_single_pair(params, delta, eps)
    return PriceProfile(m1, m2, m1, m2)


def price_deviation_improvement(
    params: MarketParams,
    capacities: CapacityProfile,
    prices: PriceProfile,
    *,
    radius: float = 1e-3,
    points: int = 21,
    joint: bool = False,
) -> float:
    """Best revenue gain from a small unilateral price deviation.

    Probes each firm's price(s) on an even grid of ``points`` offsets in
    [-radius, +radius] (clipped at zero) and reports the largest revenue
    improvement over the candidate equilibrium.  With ``joint=False`` each
    class price deviates separately (two-price competition); with
    ``joint=True`` a firm's single price moves in both classes at once.
    At an equilibrium the result should not exceed numerical noise.
    """
    offsets = np.linspace(-radius, radius, points)
    eps = params.epsilon
    best = 0.0

    class_data = []
    for driver_class in (EV, ICE):
        n1, n2 = capacities.class_pair(driver_class)
        p1, p2 = prices.class_pair(driver_class)
        W = params.intercept(driver_class)
        slope = params.class_slope(driver_class)
        q1, q2 = _class_quantities_array(
            W, slope, eps, n1, n2,
            0.0 if p1 is None else p1, 0.0 if p2 is None else p2,
        )
        class_data.append((W, slope, n1, n2, p1, p2, float(q1), float(q2)))

    if not joint:
        for W, slope, n1, n2, p1, p2, q1, q2 in class_data:
            for own, opp, n_own, n_opp, q_own, side in (
                (p1, p2, n1, n2, q1, 1),
                (p2, p1, n2, n1, q2, 2),
            ):
                if own is None or n_own <= 0.0:
                    continue
                probes = np.clip(own + offsets, 0.0, None)
                if side == 1:
                    qp, _ = _class_quantities_array(
                        W, slope, eps, n_own, n_opp, probes,
                        0.0 if opp is None else opp,
                    )
                else:
                    _, qp = _class_quantities_array(
                        W, slope, eps, n_opp, n_own,
                        0.0 if opp is None else opp, probes,
                    )
                best = max(best, float(np.max(probes * qp - own * q_own)))
        return best

    (W_e, a_e, ne1, ne2, c1, c2, qe1, qe2) = class_data[0]
    (W_d, a_d, nd1, nd2, m1, m2, qd1, qd2) = class_data[1]
    for firm in (1, 2):
        own = m1 if firm == 1 else m2
        if own is None:
            continue
        probes = np.clip(own + offsets, 0.0, None)
        if firm == 1:
            qe, _ = _class_quantities_array(
                W_e, a_e, eps, ne1, ne2, probes, 0.0 if c2 is None else c2
            )
            qd, _ = _class_quantities_array(
                W_d, a_d, eps, nd1, nd2, probes, 0.0 if m2 is None else m2
            )
            base = own * (qe1 + qd1)
        else:
            _, qe = _class_quantities_array(
                W_e, a_e, eps, ne1, ne2, 0.0 if c1 is None else c1, probes
            )
            _, qd = _class_quantities_array(
                W_d, a_d, eps, nd1, nd2, 0.0 if m1 is None else m1, probes
            )
            base = own * (qe2 + qd2)
        best = max(best, float(np.max(probes * (qe + qd) - base)))
    return best


def firm_revenue(
    params: MarketParams,
    capacities: CapacityProfile,
    prices: PriceProfile,
    firm: int,
) -> float:
    """Second-stage revenue c*q_e + m*q_d at given prices (no capacity cost)."""
    _check_firm(firm)
    outcome = wardrop_quantities(params, capacities, prices)
    total = 0.0
    for driver_class in (EV, ICE):
        p = prices.class_pair(driver_class)[firm - 1]
        q = outcome.class_pair(driver_class)[firm - 1]
        if q > 0.0:
            if p is None:
                raise ValueError(f"positive {driver_class} quantity at firm {firm} without a price")
            total += p * q
    return total
