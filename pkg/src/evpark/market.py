"""Core types and consumer equilibrium for the two-firm parking market.

Two firms operate parking lots and sell spots to two driver classes: EV
drivers, who need a charger-equipped spot, and conventional (ICE) drivers,
who use regular spots.  The classes do not compete for the same spots, so
each class forms its own congestion game across the two firms.  A driver of
class k parking at firm i gets utility

    U_ki = W_k * (1 - slope_k * (q_k1 + q_k2)) - epsilon * q_ki / N_ki - price_ki

where W_k is the willingness to pay, slope_k scales how fast the class's
value decays in the total mass served, and epsilon * q / N is the congestion
cost of squeezing mass q into N spots.  Demand splits between the firms until
no driver wants to move: every firm serving a positive mass has marginal
utility zero, and a firm serving nothing offers no positive utility.  That
sorting condition (a Wardrop equilibrium) has a unique solution per class
because the utility system is a strictly diagonally dominant linear system.

Total capacity across both firms is normalised to 1, so all capacities and
served quantities live on comparable scales.  Quantities may exceed the
number of spots: q > N simply means heavy congestion (cruising for a spot),
not an infeasibility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EV = "ev"
ICE = "ice"
DRIVER_CLASSES = (EV, ICE)

#: Slack allowed when verifying that an inactive firm's utility is
#: non-positive; keeps the solver total under float rounding.
_UTILITY_SLACK = 1e-12

#: Residual bound the solver guarantees for marginal utilities at firms
#: serving a positive quantity (used by certification tests).
WARDROP_RESIDUAL_TOL = 1e-9


class ZeroCapacityError(ValueError):
    """Marginal utility was requested for a firm/class cell with no spots.

    Congestion epsilon * q / N diverges as N -> 0, so the marginal utility
    of parking there is not defined.  Equilibrium quantities at such a cell
    are always zero; use those directly instead.
    """


def _require_finite_frac(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    if value < 0.0 or value > 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class MarketParams:
    """Demand and congestion parameters shared by both firms.

    Attributes:
        W_e: EV drivers' willingness to pay (intercept of inverse demand).
        W_d: ICE drivers' willingness to pay.  Must satisfy W_e > W_d > 0:
            charging service commands a premium over plain parking.
        alpha: demand slope of the EV class.
        beta: demand slope of the ICE class.
        epsilon: congestion cost scale, common to both classes.
    """

    W_e: float
    W_d: float
    alpha: float
    beta: float
    epsilon: float

    def __post_init__(self) -> None:
        for name in ("W_e", "W_d", "alpha", "beta", "epsilon"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            if value <= 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if not self.W_e > self.W_d:
            raise ValueError(
                f"EV willingness to pay must exceed ICE willingness to pay "
                f"(W_e={self.W_e}, W_d={self.W_d})"
            )

    def intercept(self, driver_class: str) -> float:
        """Willingness to pay W_k for the given driver class."""
        _check_class(driver_class)
        return self.W_e if driver_class == EV else self.W_d

    def class_slope(self, driver_class: str) -> float:
        """Inverse-demand slope for the given driver class."""
        _check_class(driver_class)
        return self.alpha if driver_class == EV else self.beta


def _check_class(driver_class: str) -> None:
    if driver_class not in DRIVER_CLASSES:
        raise ValueError(f"driver_class must be one of {DRIVER_CLASSES}, got {driver_class!r}")


def _check_firm(firm: int) -> None:
    if firm not in (1, 2):
        raise ValueError(f"firm must be 1 or 2, got {firm!r}")


@dataclass(frozen=True)
class CapacityProfile:
    """Allocation of both firms' spots between charger-equipped and regular.

    Firm 1 owns a share ``delta`` of all spots and firm 2 the rest; within
    its endowment each firm devotes N_e spots to EV charging and N_d to
    regular parking.  The split must be exhaustive: N_ei + N_di equals the
    firm's endowment (checked to 1e-9).
    """

    delta: float
    N_e1: float
    N_e2: float
    N_d1: float
    N_d2: float

    def __post_init__(self) -> None:
        for name in ("delta", "N_e1", "N_e2", "N_d1", "N_d2"):
            _require_finite_frac(name, getattr(self, name))
        if abs(self.N_e1 + self.N_d1 - self.delta) > 1e-9:
            raise ValueError(
                f"firm 1 spots must sum to its endowment: "
                f"N_e1 + N_d1 = {self.N_e1 + self.N_d1} != delta = {self.delta}"
            )
        if abs(self.N_e2 + self.N_d2 - (1.0 - self.delta)) > 1e-9:
            raise ValueError(
                f"firm 2 spots must sum to its endowment: "
                f"N_e2 + N_d2 = {self.N_e2 + self.N_d2} != 1 - delta = {1.0 - self.delta}"
            )

    @classmethod
    def from_ev_split(cls, delta: float, N_e1: float, N_e2: float) -> "CapacityProfile":
        """Build a profile from the EV capacities, with regular spots as remainder."""
        _require_finite_frac("delta", delta)
        return cls(delta, N_e1, N_e2, delta - N_e1, (1.0 - delta) - N_e2)

    def endowment(self, firm: int) -> float:
        _check_firm(firm)
        return self.delta if firm == 1 else 1.0 - self.delta

    def class_pair(self, driver_class: str) -> tuple[float, float]:
        """Capacities (firm 1, firm 2) serving the given driver class."""
        _check_class(driver_class)
        if driver_class == EV:
            return self.N_e1, self.N_e2
        return self.N_d1, self.N_d2


def _price_ok(value) -> bool:
    return value is None or (
        isinstance(value, (int, float)) and math.isfinite(value) and value >= 0.0
    )


@dataclass(frozen=True)
class PriceProfile:
    """Per-firm prices: c for a charger-equipped spot, m for a regular one.

    ``None`` marks a side of the market the firm does not operate (zero
    capacity), so no price exists there.  All concrete prices must be
    finite and nonnegative.
    """

    c1: float | None
    c2: float | None
    m1: float | None
    m2: float | None

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "m1", "m2"):
            if not _price_ok(getattr(self, name)):
                raise ValueError(
                    f"{name} must be None or a finite nonnegative price, "
                    f"got {getattr(self, name)!r}"
                )

    def class_pair(self, driver_class: str) -> tuple[float | None, float | None]:
        """Prices (firm 1, firm 2) charged to the given driver class."""
        _check_class(driver_class)
        if driver_class == EV:
            return self.c1, self.c2
        return self.m1, self.m2


@dataclass(frozen=True)
class WardropOutcome:
    """Equilibrium masses served, per firm and driver class.

    Quantities are nonnegative and may exceed the capacity of the cell
    serving them (congested parking), but never arise from a zero-capacity
    cell.
    """

    q_e1: float
    q_e2: float
    q_d1: float
    q_d2: float

    def __post_init__(self) -> None:
        for name in ("q_e1", "q_e2", "q_d1", "q_d2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")

    def class_pair(self, driver_class: str) -> tuple[float, float]:
        _check_class(driver_class)
        if driver_class == EV:
            return self.q_e1, self.q_e2
        return self.q_d1, self.q_d2

    def class_total(self, driver_class: str) -> float:
        q1, q2 = self.class_pair(driver_class)
        return q1 + q2


def marginal_utility(
    params: MarketParams,
    driver_class: str,
    firm: int,
    quantities: tuple[float, float],
    capacities: CapacityProfile,
    prices: PriceProfile,
) -> float:
    """Utility of the marginal driver of a class parking at a firm.

        U = W * (1 - slope * (q1 + q2)) - epsilon * q_own / N_own - price_own

    Args:
        params: market parameters.
        driver_class: EV or ICE.
        firm: 1 or 2.
        quantities: (q1, q2) masses currently served to this class.
        capacities: capacity profile; the firm's cell must have spots.
        prices: price profile; the firm's cell must have a price.

    Raises:
        ZeroCapacityError: if the firm has no capacity for this class
            (congestion would be infinite).
        ValueError: if the firm has capacity but no price.
    """
    _check_firm(firm)
    n1, n2 = capacities.class_pair(driver_class)
    n_own = n1 if firm == 1 else n2
    if n_own <= 0.0:
        raise ZeroCapacityError(
            f"firm {firm} has no {driver_class} capacity; marginal utility undefined"
        )
    p1, p2 = prices.class_pair(driver_class)
    p_own = p1 if firm == 1 else p2
    if p_own is None:
        raise ValueError(f"firm {firm} has {driver_class} capacity but no price")
    q1, q2 = quantities
    q_own = q1 if firm == 1 else q2
    W = params.intercept(driver_class)
    slope = params.class_slope(driver_class)
    return W * (1.0 - slope * (q1 + q2)) - params.epsilon * q_own / n_own - p_own


def _single_firm_quantity(W: float, slope: float, eps: float, n: float, price: float) -> float:
    """Mass served when only one firm (capacity n > 0) offers this class."""
    return max(0.0, (W - price) / (slope * W + eps / n))


def _class_quantities_scalar(
    W: float, slope: float, eps: float, n1: float, n2: float, p1: float, p2: float
) -> tuple[float, float]:
    """Wardrop quantities for one driver class, scalar inputs.

    Enumerates the four support patterns of the complementarity problem
    (both firms active, only firm 2, only firm 1, neither) and returns the
    one whose inactive firms all have non-positive utility.  The class
    system is positive definite, so exactly one pattern is consistent.
    """
    has1 = n1 > 0.0
    has2 = n2 > 0.0
    if not has1 and not has2:
        return 0.0, 0.0
    if has1 and has2:
        a1 = slope * W * (1.0 + n2 / n1) + eps / n1
        a2 = slope * W * (1.0 + n1 / n2) + eps / n2
        i1 = (W * (1.0 + slope * (n2 / eps) * (p2 - p1)) - p1) / a1
        i2 = (W * (1.0 + slope * (n1 / eps) * (p1 - p2)) - p2) / a2
        if i1 >= -_UTILITY_SLACK and i2 >= -_UTILITY_SLACK:
            return max(0.0, i1), max(0.0, i2)
    # One firm priced out (or absent): try serving the class from one side.
    if has2:
        s2 = _single_firm_quantity(W, slope, eps, n2, p2)
        if not has1 or W * (1.0 - slope * s2) - p1 <= _UTILITY_SLACK:
            return 0.0, s2
    if has1:
        s1 = _single_firm_quantity(W, slope, eps, n1, p1)
        if not has2 or W * (1.0 - slope * s1) - p2 <= _UTILITY_SLACK:
            return s1, 0.0
    return 0.0, 0.0


def _class_quantities_array(W, slope, eps, n1, n2, p1, p2):
    """Vectorised twin of :func:`_class_quantities_scalar`.

    Broadcasts all four per-firm inputs; used by grid scans where the
    scalar path would be too slow.  A randomized test pins the two
    implementations together.
    """
    n1, n2, p1, p2 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (n1, n2, p1, p2))
    )
    has1 = n1 > 0.0
    has2 = n2 > 0.0
    safe1 = np.where(has1, n1, 1.0)
    safe2 = np.where(has2, n2, 1.0)

    s1 = np.maximum(0.0, (W - p1) / (slope * W + eps / safe1))
    s2 = np.maximum(0.0, (W - p2) / (slope * W + eps / safe2))

    a1 = slope * W * (1.0 + n2 / safe1) + eps / safe1
    a2 = slope * W * (1.0 + n1 / safe2) + eps / safe2
    i1 = (W * (1.0 + slope * (n2 / eps) * (p2 - p1)) - p1) / a1
    i2 = (W * (1.0 + slope * (n1 / eps) * (p1 - p2)) - p2) / a2

    interior = has1 & has2 & (i1 >= -_UTILITY_SLACK) & (i2 >= -_UTILITY_SLACK)
    pin1 = has2 & (~has1 | (W * (1.0 - slope * s2) - p1 <= _UTILITY_SLACK))
    pin2 = has1 & (~has2 | (W * (1.0 - slope * s1) - p2 <= _UTILITY_SLACK))

    q1 = np.select([interior, pin1, pin2], [np.maximum(0.0, i1), 0.0, s1], default=0.0)
    q2 = np.select([interior, pin1, pin2], [np.maximum(0.0, i2), s2, 0.0], default=0.0)
    return q1, q2


def wardrop_quantities(
    params: MarketParams, capacities: CapacityProfile, prices: PriceProfile
) -> WardropOutcome:
    """Solve the consumer sorting equilibrium for both driver classes.

    Every firm serving a positive mass has marginal utility within
    ``WARDROP_RESIDUAL_TOL`` of zero; every inactive firm offers at most
    zero utility.  Classes with no capacity anywhere serve nothing.

    Raises:
        ValueError: if a firm has capacity for a class but its price is the
            no-market sentinel (None).
    """
    results = {}
    for driver_class in DRIVER_CLASSES:
        n1, n2 = capacities.class_pair(driver_class)
        if n1 <= 0.0 and n2 <= 0.0:
            results[driver_class] = (0.0, 0.0)
            continue
        p1, p2 = prices.class_pair(driver_class)
        if (n1 > 0.0 and p1 is None) or (n2 > 0.0 and p2 is None):
            raise ValueError(
                f"{driver_class} market has capacity but a missing price "
                f"(prices {p1!r}, {p2!r})"
            )
        results[driver_class] = _class_quantities_scalar(
            params.intercept(driver_class),
            params.class_slope(driver_class),
            params.epsilon,
            n1,
            n2,
            0.0 if p1 is None else p1,
            0.0 if p2 is None else p2,
        )
    (q_e1, q_e2), (q_d1, q_d2) = results[EV], results[ICE]
    return WardropOutcome(q_e1, q_e2, q_d1, q_d2)


def check_no_profitable_undercut(
    params: MarketParams,
    capacities: CapacityProfile,
    prices: PriceProfile,
    tol: float = 1e-9,
) -> bool:
    """Whether no firm can grab its rival's whole class by undercutting.

    An interior price equilibrium survives undercutting deviations when, in
    each class where both firms are active, neither price exceeds

        W / 2 + epsilon * q_rival / N_rival

    i.e. the rival's price floor given its congestion relief.  Classes with
    at most one active firm are vacuously safe.
    """
    outcome = wardrop_quantities(params, capacities, prices)
    for driver_class in DRIVER_CLASSES:
        n1, n2 = capacities.class_pair(driver_class)
        if n1 <= 0.0 or n2 <= 0.0:
            continue
        p1, p2 = prices.class_pair(driver_class)
        q1, q2 = outcome.class_pair(driver_class)
        W = params.intercept(driver_class)
        if p2 > W / 2.0 + params.epsilon * q1 / n1 + tol:
            return False
        if p1 > W / 2.0 + params.epsilon * q2 / n2 + tol:
            return False
    return True
