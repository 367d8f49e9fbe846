"""Welfare accounting for a solved market outcome.

All functions take an already-solved (capacities, prices, quantities)
triple; nothing here recomputes an equilibrium.  Undefined statistics
(shares of an empty market) are reported as None rather than raised,
except where the inputs are internally inconsistent.
"""
from __future__ import annotations

from dataclasses import dataclass

from .market import (
    DRIVER_CLASSES,
    EV,
    ICE,
    CapacityProfile,
    MarketParams,
    PriceProfile,
    WardropOutcome,
    _check_firm,
)


class InconsistentOutcomeError(ValueError):
    """A positive quantity was reported for a cell with no capacity or price."""


@dataclass(frozen=True)
class WelfareReport:
    """All welfare statistics for one market outcome."""

    cs_ev: float
    cs_ice: float
    profit_1: float
    profit_2: float
    govt_cost: float
    total_welfare: float
    hhi_ev: float | None
    hhi_ice: float | None
    avg_price_ev: float | None
    avg_price_ice: float | None
    total_congestion: float


def _cell(
    label: str,
    q: float,
    n: float,
    price: float | None,
) -> tuple[float, float | None]:
    """Validate one firm/class cell, returning (q, price) for accumulation."""
    if q > 0.0 and n <= 0.0:
        raise InconsistentOutcomeError(f"{label}: quantity {q} served with no capacity")
    if q > 0.0 and price is None:
        raise InconsistentOutcomeError(f"{label}: quantity {q} served with no price")
    return q, price


def consumer_surplus(
    params: MarketParams,
    capacities: CapacityProfile,
    prices: PriceProfile,
    outcome: WardropOutcome,
) -> tuple[float, float]:
    """Consumer surplus (EV, ICE): integrated value net of congestion and prices.

    Per class, with Q = q1 + q2,

        CS = W*(Q - slope*Q^2/2) - sum_i (eps*q_i^2/(2*N_i) + price_i*q_i)

    The quadratic congestion term is the integral of eps*q/N as the cell
    fills.  Empty cells contribute nothing.
    """
    surplus = {}
    for driver_class in DRIVER_CLASSES:
        W = params.intercept(driver_class)
        slope = params.class_slope(driver_class)
        q1, q2 = outcome.class_pair(driver_class)
        n1, n2 = capacities.class_pair(driver_class)
        p1, p2 = prices.class_pair(driver_class)
        Q = q1 + q2
        cs = W * (Q - slope * Q**2 / 2.0)
        for label, q, n, p in (
            (f"{driver_class} firm 1", q1, n1, p1),
            (f"{driver_class} firm 2", q2, n2, p2),
        ):
            q, p = _cell(label, q, n, p)
            if q > 0.0:
                cs -= params.epsilon * q**2 / (2.0 * n) + p * q
        surplus[driver_class] = cs
    return surplus[EV], surplus[ICE]


def realized_profit(
    capacities: CapacityProfile,
    prices: PriceProfile,
    outcome: WardropOutcome,
    p: float,
    firm: int,
) -> float:
    """One firm's profit: price revenue minus net conversion cost p per EV spot."""
    _check_firm(firm)
    total = 0.0
    for driver_class in DRIVER_CLASSES:
        q = outcome.class_pair(driver_class)[firm - 1]
        n = capacities.class_pair(driver_class)[firm - 1]
        price = prices.class_pair(driver_class)[firm - 1]
        q, price = _cell(f"{driver_class} firm {firm}", q, n, price)
        if q > 0.0:
            total += price * q
    n_ev = capacities.class_pair(EV)[firm - 1]
    return total - p * n_ev


def government_cost(capacities: CapacityProfile, s: float) -> float:
    """Subsidy outlay s per charger-equipped spot built, across both firms."""
    if s < 0.0:
        raise ValueError(f"subsidy s must be nonnegative, got {s}")
    return s * (capacities.N_e1 + capacities.N_e2)


def herfindahl(q1: float, q2: float) -> float | None:
    """Herfindahl index of two served quantities; None for an empty market."""
    if q1 < 0.0 or q2 < 0.0:
        raise ValueError(f"quantities must be nonnegative, got ({q1}, {q2})")
    total = q1 + q2
    if total <= 0.0:
        return None
    s1 = q1 / total
    s2 = q2 / total
    return s1 * s1 + s2 * s2


def average_price(q1: float, q2: float, p1: float, p2: float) -> float:
    """Quantity-weighted average price; the market must be nonempty."""
    total = q1 + q2
    if total <= 0.0:
        raise ValueError("average price undefined for an empty market")
    return (q1 * p1 + q2 * p2) / total


def total_congestion(
    outcome: WardropOutcome, capacities: CapacityProfile, epsilon: float
) -> float:
    """Sum of marginal congestion costs eps*q/N over all nonempty cells."""
    total = 0.0
    for driver_class in DRIVER_CLASSES:
        for q, n in zip(outcome.class_pair(driver_class), capacities.class_pair(driver_class)):
            if q > 0.0 and n <= 0.0:
                raise InconsistentOutcomeError(
                    f"{driver_class}: quantity {q} served with no capacity"
                )
            if q > 0.0:
                total += epsilon * q / n
    return total


def _safe_average_price(q1, q2, p1, p2):
    if q1 + q2 <= 0.0:
        return None
    return average_price(q1, q2, p1 if p1 is not None else 0.0, p2 if p2 is not None else 0.0)


def welfare_report(
    params: MarketParams,
    capacities: CapacityProfile,
    prices: PriceProfile,
    outcome: WardropOutcome,
    p: float = 0.0,
    s: float = 0.0,
) -> WelfareReport:
    """Assemble the full welfare account for one solved outcome.

    Total welfare is the identity

        CS_ev + CS_ice + profit_1 + profit_2 - government cost

    with p the firms' net cost per charger spot and s the subsidy per
    charger spot.  Prices are transfers, so they cancel between surplus and
    profits; the subsidy is a transfer too but its cost is borne outside
    the market, hence the explicit deduction.
    """
    cs_ev, cs_ice = consumer_surplus(params, capacities, prices, outcome)
    profit_1 = realized_profit(capacities, prices, outcome, p, 1)
    profit_2 = realized_profit(capacities, prices, outcome, p, 2)
    govt = government_cost(capacities, s)
    total = cs_ev + cs_ice + profit_1 + profit_2 - govt
    return WelfareReport(
        cs_ev=cs_ev,
        cs_ice=cs_ice,
        profit_1=profit_1,
        profit_2=profit_2,
        govt_cost=govt,
        total_welfare=total,
        hhi_ev=herfindahl(outcome.q_e1, outcome.q_e2),
        hhi_ice=herfindahl(outcome.q_d1, outcome.q_d2),
        avg_price_ev=_safe_average_price(outcome.q_e1, outcome.q_e2, prices.c1, prices.c2),
        avg_price_ice=_safe_average_price(outcome.q_d1, outcome.q_d2, prices.m1, prices.m2),
        total_congestion=total_congestion(outcome, capacities, params.epsilon),
    )
