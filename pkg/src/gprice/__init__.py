"""Sublinear (G-) expectations under volatility uncertainty and utility pricing."""

from .core import (
    CylinderPayoff,
    GridFunction,
    SpatialGrid,
    TimeGrid,
    UncertaintySet,
    brownian,
    constant_payoff,
    g_lower,
    g_upper,
)
from .errors import (
    AlignmentError,
    CapacityError,
    ConfigError,
    DomainError,
    GPriceError,
    InversionError,
    NumericalError,
    RangeError,
)
from .expectation import (
    ConditionalResult,
    ExpectationRequest,
    Numerics,
    batch_expectation,
    conditional_g_expectation,
    expectation,
    g_expectation,
    lower_expectation,
    tower_compose,
    upper_expectation,
)
from .lattice import (
    LatticeSpec,
    enumerate_adapted_strategies,
    lattice_dpp_expectation,
    monte_carlo_prior_bound,
)
from .pde import SolverConfig, evaluate_at, solve_g_heat
from .pricing import (
    PricingContext,
    ambiguity_premium_exact,
    ambiguity_premium_pratt,
    ask_price,
    bid_price,
    certainty_equivalent,
    compare_uncertainty_aversion,
    dynamic_utility,
)
from .utility import (
    ExponentialUtility,
    LinearUtility,
    LogUtility,
    PowerUtility,
    TabulatedUtility,
    Utility,
    is_more_risk_averse,
    make_utility,
)

__version__ = "0.1.0"
