"""Solver and pricing library for guaranteed-VWAP contracts under permanent
market impact and convex execution costs."""

from .models import CostSpec, ImpactSpec, MarketParams, VolumeProfile
from .closed_forms import (
    TradingCurve,
    almgren_chriss_curve,
    almgren_chriss_premium,
    no_impact_curve,
    no_impact_premium,
    risk_neutral_curve,
    risk_neutral_premium,
    tracking_curve,
)
from .solver import (
    NonConvergenceError,
    SingularSystemError,
    SolverConfig,
    SolverDiagnostics,
    newton_step,
    residual,
    solve,
)
from .pricing import (
    PricingReport,
    adjust_for_own_volume,
    breakeven_gap,
    objective,
    own_volume_factor,
    premium,
    relative_premium,
    slippage_moments,
)
from .montecarlo import (
    AdaptedPerturbation,
    PolicyUtility,
    SimulationSpec,
    SlippageSample,
    simulate_slippage,
    utility_comparison,
)

__version__ = "0.1.0"
