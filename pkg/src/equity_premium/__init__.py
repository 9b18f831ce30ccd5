"""Market-implied densities, replicated power payoffs, and the risk aversion
behind expected and realized equity premiums."""

__version__ = "0.1.0"

from .market import (  # noqa: E402
    GridDensity,
    LogNormalMarket,
    OptionCurve,
    UnreliableDensityError,
    VolSurface,
    bs_option_price,
    density_from_calls,
    log_density_slope,
    log_strike_grid,
    lognormal_density,
    lognormal_log_slope,
    option_curve_from_surface,
)
from .replication import (  # noqa: E402
    PowerPayoffPrice,
    TruncationWarning,
    expected_return_numeric,
    price_power_payoff,
    replicate_price,
)
from .premium import (  # noqa: E402
    ImpliedRiskAversion,
    NoSolutionError,
    PremiumQuote,
    expected_return_lognormal,
    implied_r_lognormal,
    implied_r_numeric,
    implied_r_series,
)
from .historical import (  # noqa: E402
    InsufficientDataError,
    PartitionedReturns,
    RealizedRiskAversion,
    ReturnSeries,
    moving_average_r,
    partition_returns,
    realized_avg_risk_aversion,
    realized_rate,
    run_experiment_grid,
)
from .structuring import (  # noqa: E402
    BeliefDensity,
    InvestorSpec,
    PayoffCurve,
    RiskAversionProfile,
    avg_risk_aversion_belief,
    belief_from_payoff,
    equilibrium_market,
    growth_optimal_payoff,
    payoff_from_belief,
    risk_aversion_profile,
)
