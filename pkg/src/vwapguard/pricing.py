"""Objective evaluation and indifference pricing of guaranteed-VWAP contracts.

The premium the broker must charge to be indifferent is

    pi(q0) = integral_0^q0 F(z) dz + I(q*)

where I is the running objective (execution costs, minus the impact rebate
earned against the benchmark, plus the risk-aversion variance penalty) and
q* the optimal curve.  A negative premium means the broker profits from the
contract even before fees.

The discrete quadrature here mirrors the solver scheme exactly (forward
differences, volume and cumulative volume at the right node of each step),
so a converged solver curve is a stationary point of the discrete objective.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import numpy as np

from .closed_forms import TradingCurve
from .models import MarketParams
from . import solver as _solver
from .solver import SolverConfig, SolverDiagnostics

__all__ = [
    "PricingReport",
    "LambdaSearch",
    "NoSignChangeError",
    "objective",
    "slippage_moments",
    "premium",
    "own_volume_factor",
    "adjust_for_own_volume",
    "breakeven_gap",
    "relative_premium",
]


class NoSignChangeError(RuntimeError):
    """The break-even function kept one sign over the whole bracket."""

    def __init__(self, samples):
        lo, hi = samples[0], samples[-1]
        super().__init__(
            f"no sign change: h({lo[0]:.6g}) = {lo[1]:.6g}, h({hi[0]:.6g}) = {hi[1]:.6g}")
        self.samples = list(samples)


@dataclass(frozen=True)
class PricingReport:
    """Premium and diagnostics for one contract."""

    premium: float
    premium_bps: float
    naive_premium: float
    naive_premium_bps: float
    objective_value: float
    slippage_mean: float
    slippage_std: float
    diagnostics: SolverDiagnostics
    lambda_star: float | None = None
    lambda_star_bps: float | None = None


def _scheme_terms(params: MarketParams, curve: TradingCurve, lam: float):
    """Shared discrete quadrature pieces: cost, rebate and variance terms."""
    t = curve.times
    dt = np.diff(t)
    vstep = params.volume.interval_rates(t)
    qcum = np.concatenate([[0.0], np.cumsum(vstep * dt)])
    qtot = qcum[-1]
    q = curve.q
    rates = np.diff(q) / dt

    cost_term = float(np.sum(dt * vstep * params.cost.cost(rates / vstep)))
    scale = params.q0 * (1.0 - lam)
    rebate = float(np.sum(dt * scale * (vstep / qtot)
                          * params.impact.impact_integral(params.q0 - q[1:])))
    dev = q[1:] / params.q0 - (1.0 - lam) * (1.0 - qcum[1:] / qtot)
    var_sum = float(np.sum(dt * dev ** 2))
    return cost_term, rebate, var_sum


def objective(params: MarketParams, curve: TradingCurve, lam: float = 0.0) -> float:
    """Discrete running objective I(q) in currency (lam = 0 for absolute
    pricing; general lam prices the contract in fractions of the VWAP)."""
    cost_term, rebate, var_sum = _scheme_terms(params, curve, lam)
    penalty = 0.5 * params.gamma * params.sigma ** 2 * params.q0 ** 2 * var_sum
    return cost_term - rebate + penalty


def slippage_moments(params: MarketParams, curve: TradingCurve):
    """Mean and variance of the terminal slippage of a deterministic curve.

    The slippage is Gaussian with
      mean = -int_0^q0 F - int V L(v/V) dt + q0 int (V/Q_T) F(q0 - q) dt
      var  = sigma^2 q0^2 int (q/q0 - (1 - Q_t/Q_T))^2 dt,
    evaluated with the same discrete quadrature as the objective.
    """
    cost_term, rebate, var_sum = _scheme_terms(params, curve, 0.0)
    mean = -params.impact.double_integral(params.q0) - cost_term + rebate
    variance = params.sigma ** 2 * params.q0 ** 2 * var_sum
    return mean, variance


def _naive_curve(params: MarketParams, config: SolverConfig) -> TradingCurve:
    """Volume-tracking benchmark built from the solver-grid cumulative volume
    so its objective telescopes exactly under the discrete scheme."""
    times = params.grid_times(config.J)
    vstep = params.volume.interval_rates(times)
    qcum = np.concatenate([[0.0], np.cumsum(vstep * np.diff(times))])
    q = params.q0 * (1.0 - qcum / qcum[-1])
    return TradingCurve(times, q)


def premium(params: MarketParams, config: SolverConfig = SolverConfig(),
            relative: bool = False) -> PricingReport:
    """Absolute indifference premium: solve at lam = 0, price the optimal
    curve, and report the volume-tracking benchmark alongside.

    With relative=True the break-even VWAP fraction lambda* is also computed
    (one extra solve per break-even evaluation).
    """
    cfg = replace(config, lam=0.0)
    curve, diags = _solver.solve(params, cfg)
    obj = objective(params, curve, 0.0)
    f_int = params.impact.double_integral(params.q0)
    pi = f_int + obj
    naive = f_int + objective(params, _naive_curve(params, cfg), 0.0)
    mean, variance = slippage_moments(params, curve)

    notional = params.q0 * params.S0
    lam_star = lam_star_bps = None
    if relative:
        search = relative_premium(params, config)
        lam_star = search.lambda_star
        lam_star_bps = 1e4 * lam_star

    return PricingReport(
        premium=pi,
        premium_bps=1e4 * pi / notional,
        naive_premium=naive,
        naive_premium_bps=1e4 * naive / notional,
        objective_value=obj,
        slippage_mean=mean,
        slippage_std=float(np.sqrt(variance)),
        diagnostics=diags,
        lambda_star=lam_star,
        lambda_star_bps=lam_star_bps,
    )


def own_volume_factor(params: MarketParams) -> float:
    """Q_T / (Q_T + q0), the rescaling that maps the market-volume VWAP
    benchmark onto the one including the broker's own trades."""
    qt = params.volume.total
    return qt / (qt + params.q0)


def adjust_for_own_volume(params: MarketParams) -> MarketParams:
    """Parameters for the benchmark that includes the broker's own volume:
    identical problem with impact and volatility scaled by Q_T/(Q_T + q0)."""
    c = own_volume_factor(params)
    impact = replace(params.impact, k=c * params.impact.k)
    return replace(params, impact=impact, sigma=c * params.sigma)


def breakeven_gap(params: MarketParams, config: SolverConfig, lam: float) -> float:
    """h(lam) = lam*q0*S0 - int_0^q0 F - I^lam(q*_lam); the contract breaks
    even at the largest lam with h(lam) <= 0."""
    cfg = replace(config, lam=lam)
    curve, _ = _solver.solve(params, cfg)
    return (lam * params.q0 * params.S0
            - params.impact.double_integral(params.q0)
            - objective(params, curve, lam))


@dataclass(frozen=True)
class LambdaSearch:
    lambda_star: float
    samples: tuple


def relative_premium(params: MarketParams, config: SolverConfig = SolverConfig(),
                     lo: float = -0.01, hi: float = 0.01,
                     n_scan: int = 20, width_tol: float = 1e-7) -> LambdaSearch:
    """Break-even VWAP fraction lambda*: the root of h on [lo, hi].

    Nothing guarantees monotonicity of h, so the bracket is scanned at
    n_scan points for a sign change before bisecting; all h samples are
    returned for diagnostics.  Bisection runs to width_tol and secant steps
    then polish the root to the precision of the h evaluations themselves.
    """
    hi = min(hi, 1.0)
    if not lo < hi:
        raise ValueError("need lo < hi <= 1")
    lams = np.linspace(lo, hi, n_scan)
    samples = [(float(l), breakeven_gap(params, config, float(l))) for l in lams]

    bracket = None
    for (la, ha), (lb, hb) in zip(samples, samples[1:]):
        if ha == 0.0:
            return LambdaSearch(la, tuple(samples))
        if ha * hb < 0.0:
            bracket = (la, ha, lb, hb)
            break
    else:
        if samples[-1][1] == 0.0:
            return LambdaSearch(samples[-1][0], tuple(samples))
        raise NoSignChangeError(samples)

    la, ha, lb, hb = bracket
    while lb - la > width_tol:
        mid = 0.5 * (la + lb)
        hm = breakeven_gap(params, config, mid)
        samples.append((mid, hm))
        if hm == 0.0:
            return LambdaSearch(mid, tuple(samples))
        if (hm < 0.0) == (ha < 0.0):
            la, ha = mid, hm
        else:
            lb, hb = mid, hm

    # Secant polish inside the bracket; one step suffices when h is affine.
    x0, h0, x1, h1 = la, ha, lb, hb
    h_tol = 1e-12 * params.q0 * params.S0
    for _ in range(8):
        if h1 == h0:
            break
        x2 = x1 - h1 * (x1 - x0) / (h1 - h0)
        x2 = min(max(x2, la), lb)
        h2 = breakeven_gap(params, config, x2)
        samples.append((x2, h2))
        x0, h0, x1, h1 = x1, h1, x2, h2
        if abs(h2) <= h_tol:
            break
    root = x1 if abs(h1) <= abs(h0) else x0
    return LambdaSearch(float(root), tuple(samples))
