"""Equilibrium models of EV-charger investment in parking markets.

Two models: a two-firm parking duopoly where a regulator can mandate or
subsidise charger conversion (capacities chosen ahead of price
competition), and a monopolist converting spots under uncertain EV demand.
"""
from .market import (
    EV,
    ICE,
    CapacityProfile,
    MarketParams,
    PriceProfile,
    WardropOutcome,
    ZeroCapacityError,
    check_no_profitable_undercut,
    marginal_utility,
    wardrop_quantities,
)
from .pricing import (
    PriceConvergenceError,
    PricingRegime,
    best_response_price,
    firm_revenue,
    naive_single_price,
    optimal_single_price_equilibrium,
    price_deviation_improvement,
    two_price_equilibrium,
)
from .capacity import (
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
from .welfare import (
    InconsistentOutcomeError,
    WelfareReport,
    average_price,
    consumer_surplus,
    government_cost,
    herfindahl,
    realized_profit,
    total_congestion,
    welfare_report,
)
from .monopolist import (
    DemandDistribution,
    InfeasibleCaseError,
    MonopolistParams,
    MonopolistSolution,
    OracleResult,
    PricingCase,
    TheoremAssumptions,
    case1_price,
    case2_price,
    case3_price,
    ev_demand,
    expected_profit,
    grid_oracle,
    ice_price_and_revenue,
    optimal_capacity_case1,
    profit_profile,
    solve_monopolist,
    verify_theorem_assumptions,
)
from .scenarios import (
    ConfigError,
    ConstraintError,
    MalformedValueError,
    MissingKeyError,
    Scenario,
    UnknownKeyError,
    emit_csv,
    load_scenario,
    load_scenario_file,
    run_delta_sweep,
    run_mandate_sweep,
    run_monopolist_suite,
)

__version__ = "0.1.0"
