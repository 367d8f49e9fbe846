"""First-stage capacity game: policy validation, best responses, equilibria."""
import warnings

import pytest

from evpark.capacity import (
    CapacityConvergenceError,
    CapacityEquilibrium,
    CapacityRegime,
    EquilibriumConditionsWarning,
    PolicyConfig,
    capacity_deviation_improvement,
    firm_profit,
    naive_mandate_capacities,
    optimal_capacity_equilibrium,
    regime_prices,
)
from evpark.market import CapacityProfile, MarketParams, wardrop_quantities
from evpark.pricing import (
    PricingRegime,
    naive_single_price,
    optimal_single_price_equilibrium,
    two_price_equilibrium,
)
from evpark.welfare import realized_profit

# alpha*W_e = 1 and beta*W_d = 0.297: inside the well-behaved region.
IN_REGION = MarketParams(1.0, 0.9, 1.0, 0.33, 1.0)
# alpha*W_e = 6.25: outside it.
OUT_REGION = MarketParams(1.25, 1.0, 5.0, 1.0, 1.0)


class TestPolicyConfig:
    def test_net_cost(self):
        assert PolicyConfig(0.2, 0.1, 0.04).p == pytest.approx(0.06)
        assert PolicyConfig(0.0, 0.0, 0.0).p == 0.0

    @pytest.mark.parametrize(
        "r,t,s",
        [(-0.1, 0.1, 0.0), (1.1, 0.1, 0.0), (0.5, -0.1, 0.0),
         (0.5, 0.1, 0.2), (0.5, 0.1, -0.05)],
    )
    def test_invalid_policies(self, r, t, s):
        with pytest.raises(ValueError):
            PolicyConfig(r, t, s)


class TestNaiveMandate:
    def test_floor_arithmetic(self):
        caps = naive_mandate_capacities(0.4, 0.6)
        assert caps.N_e1 == pytest.approx(0.24)
        assert caps.N_e2 == pytest.approx(0.16)
        assert caps.N_d1 == pytest.approx(0.36)
        assert caps.N_d2 == pytest.approx(0.24)

    def test_extremes(self):
        assert naive_mandate_capacities(0.0, 0.6).N_e1 == 0.0
        full = naive_mandate_capacities(1.0, 0.6)
        assert full.N_d1 == 0.0 and full.N_d2 == 0.0

    @pytest.mark.parametrize("r,delta", [(-0.1, 0.5), (1.2, 0.5), (0.5, -0.1), (0.5, 1.5)])
    def test_out_of_range(self, r, delta):
        with pytest.raises(ValueError):
            naive_mandate_capacities(r, delta)


class TestRegimePrices:
    def test_dispatch(self):
        caps = naive_mandate_capacities(0.3, 0.6)
        assert regime_prices(OUT_REGION, caps, PricingRegime.TWO_PRICE) == \
            two_price_equilibrium(OUT_REGION, caps)
        assert regime_prices(OUT_REGION, caps, PricingRegime.NAIVE_SINGLE) == \
            naive_single_price(OUT_REGION, 0.6)
        assert regime_prices(OUT_REGION, caps, PricingRegime.OPTIMAL_SINGLE) == \
            optimal_single_price_equilibrium(OUT_REGION, caps)

    def test_naive_price_ignores_charger_split(self):
        # The carried-over price depends on endowments only, so converting
        # spots must not move it.
        a = regime_prices(OUT_REGION, naive_mandate_capacities(0.1, 0.6),
                          PricingRegime.NAIVE_SINGLE)
        b = regime_prices(OUT_REGION, naive_mandate_capacities(0.7, 0.6),
                          PricingRegime.NAIVE_SINGLE)
        assert a == b

    def test_single_price_regimes_price_both_classes_alike(self):
        caps = naive_mandate_capacities(0.3, 0.6)
        for regime in (PricingRegime.NAIVE_SINGLE, PricingRegime.OPTIMAL_SINGLE):
            prices = regime_prices(OUT_REGION, caps, regime)
            assert prices.c1 == prices.m1
            assert prices.c2 == prices.m2


class TestFirmProfit:
    def test_matches_manual_accounting(self):
        caps = naive_mandate_capacities(0.3, 0.6)
        prices = two_price_equilibrium(OUT_REGION, caps)
        out = wardrop_quantities(OUT_REGION, caps, prices)
        for firm in (1, 2):
            direct = firm_profit(OUT_REGION, caps, PricingRegime.TWO_PRICE, 0.05, firm)
            assert direct == pytest.approx(
                realized_profit(caps, prices, out, 0.05, firm)
            )

    def test_bad_firm(self):
        caps = naive_mandate_capacities(0.3, 0.6)
        with pytest.raises(ValueError):
            firm_profit(OUT_REGION, caps, PricingRegime.TWO_PRICE, 0.0, 0)


class TestOptimalCapacityEquilibrium:
    def test_no_unilateral_improvement(self):
        policy = PolicyConfig(0.33, 0.1, 0.0)
        eq = optimal_capacity_equilibrium(IN_REGION, policy, 0.6)
        gain = capacity_deviation_improvement(
            IN_REGION, policy, 0.6, PricingRegime.TWO_PRICE,
            eq.capacities.N_e1, eq.capacities.N_e2,
        )
        assert gain <= 1e-7

    def test_symmetric_split_symmetric_outcome(self):
        eq = optimal_capacity_equilibrium(IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.5)
        assert eq.capacities.N_e1 == pytest.approx(eq.capacities.N_e2, abs=1e-6)
        assert eq.profits[0] == pytest.approx(eq.profits[1], abs=1e-6)

    def test_mandate_floor_respected(self):
        policy = PolicyConfig(0.4, 0.1, 0.0)
        eq = optimal_capacity_equilibrium(IN_REGION, policy, 0.7)
        assert eq.capacities.N_e1 >= 0.4 * 0.7 - 1e-12
        assert eq.capacities.N_e2 >= 0.4 * 0.3 - 1e-12

    def test_subsidy_expands_charging(self):
        base = optimal_capacity_equilibrium(IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6)
        subsidised = optimal_capacity_equilibrium(
            IN_REGION, PolicyConfig(0.0, 0.1, 0.1), 0.6
        )
        assert (
            subsidised.capacities.N_e1 + subsidised.capacities.N_e2
            > base.capacities.N_e1 + base.capacities.N_e2
        )

    def test_initial_point_does_not_matter(self):
        policy = PolicyConfig(0.2, 0.1, 0.05)
        a = optimal_capacity_equilibrium(IN_REGION, policy, 0.6)
        b = optimal_capacity_equilibrium(IN_REGION, policy, 0.6, initial=(0.55, 0.35))
        assert a.capacities.N_e1 == pytest.approx(b.capacities.N_e1, abs=1e-5)
        assert a.capacities.N_e2 == pytest.approx(b.capacities.N_e2, abs=1e-5)

    def test_in_region_solve_is_quiet(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", EquilibriumConditionsWarning)
            eq = optimal_capacity_equilibrium(IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6)
        assert isinstance(eq, CapacityEquilibrium)
        assert eq.rounds >= 1

    def test_warns_outside_region(self):
        with pytest.warns(EquilibriumConditionsWarning):
            optimal_capacity_equilibrium(OUT_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6)

    def test_unsupported_pricing_needs_opt_in(self):
        with pytest.raises(ValueError, match="allow_unsupported_pricing"):
            optimal_capacity_equilibrium(
                IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6,
                regime=PricingRegime.OPTIMAL_SINGLE,
            )
        with pytest.warns(EquilibriumConditionsWarning):
            eq = optimal_capacity_equilibrium(
                IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6,
                regime=PricingRegime.OPTIMAL_SINGLE,
                allow_unsupported_pricing=True,
            )
        assert isinstance(eq, CapacityEquilibrium)

    def test_exhausted_round_budget(self):
        with pytest.raises(CapacityConvergenceError) as err:
            optimal_capacity_equilibrium(
                IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 0.6, max_rounds=0
            )
        assert err.value.rounds == 0
        assert err.value.history == [(0.0, 0.0)]

    def test_delta_out_of_range(self):
        with pytest.raises(ValueError):
            optimal_capacity_equilibrium(IN_REGION, PolicyConfig(0.0, 0.1, 0.0), 1.5)


def test_regime_enum_values_are_the_config_names():
    assert CapacityRegime.NAIVE_MANDATE.value == "naive-mandate"
    assert CapacityRegime.OPTIMAL.value == "optimal"
