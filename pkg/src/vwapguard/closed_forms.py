"""Analytic optimal curves and premiums for the model cases that admit closed
forms: zero permanent impact (any cost, any volume curve), and flat volume
with linear impact and quadratic cost, including its risk-neutral limit.

These serve as oracles for the numerical solver, so premium integrals are
evaluated with composite Simpson quadrature on a refined grid.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .models import MarketParams

__all__ = [
    "TradingCurve",
    "tracking_curve",
    "no_impact_curve",
    "no_impact_premium",
    "almgren_chriss_curve",
    "almgren_chriss_premium",
    "risk_neutral_curve",
    "risk_neutral_premium",
]

# Below this value of kappa*T the sinh/tanh product is evaluated by its
# series expansion to avoid catastrophic cancellation as gamma -> 0.
_SMALL_KAPPA_T = 1e-6


@dataclass(frozen=True)
class TradingCurve:
    """Inventory trajectory q on a time grid, optionally with the adjoint p.

    Optimal curves satisfy q[0] = q0 and q[-1] = 0 exactly.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("curve needs at least two grid nodes")
        if q.shape != times.shape:
            raise ValueError("q and times must have matching shapes")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("grid times must be strictly increasing")
        arrays = {"times": times, "q": q}
        if self.p is not None:
            p = np.asarray(self.p, dtype=float)
            if p.shape != times.shape:
                raise ValueError("p and times must have matching shapes")
            arrays["p"] = p
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps(self) -> int:
        return self.times.size - 1

    def step_rates(self) -> np.ndarray:
        """Forward-difference dq/dt on each interval."""
        return np.diff(self.q) / np.diff(self.times)

    def resample(self, times: np.ndarray) -> "TradingCurve":
        """Linear interpolation onto a finer grid (exact at shared nodes)."""
        times = np.asarray(times, dtype=float)
        q = np.interp(times, self.times, self.q)
        p = None if self.p is None else np.interp(times, self.times, self.p)
        return TradingCurve(times, q, p)


def tracking_curve(params: MarketParams, times: np.ndarray) -> TradingCurve:
    """The volume-tracking benchmark q0 * (1 - Q_t / Q_T).

    This is the inventory path proportional to the remaining market volume;
    it is also the optimal curve when permanent impact is absent.
    """
    vol = params.volume
    q = params.q0 * (1.0 - vol.cumulative(times) / vol.total)
    p = np.full_like(q, float(params.cost.marginal_cost(-params.q0 / vol.total)))
    return TradingCurve(np.asarray(times, dtype=float), q, p)


def no_impact_curve(params: MarketParams, times: np.ndarray) -> TradingCurve:
    """Optimal curve when f = 0: follow the relative market-volume curve."""
    if not params.impact.is_zero:
        raise ValueError("no_impact_curve requires zero permanent impact")
    return tracking_curve(params, times)


def no_impact_premium(params: MarketParams) -> float:
    """Premium when f = 0: Q_T * L(q0 / Q_T)."""
    if not params.impact.is_zero:
        raise ValueError("no_impact_premium requires zero permanent impact")
    qt = params.volume.total
    return qt * float(params.cost.cost(params.q0 / qt))


def _flat_rate(params: MarketParams) -> float:
    rates = params.volume.bucket_rates
    if np.ptp(rates) > 1e-12 * rates[0]:
        raise ValueError("closed form requires a flat volume profile")
    return float(rates[0])


def _require_linear_quadratic(params: MarketParams) -> float:
    """Validate the flat/linear/quadratic closed-form case; returns V."""
    if params.impact.kind not in ("zero", "linear"):
        raise ValueError("closed form requires linear (or zero) permanent impact")
    if params.cost.phi != 1.0 or params.cost.psi != 0.0:
        raise ValueError("closed form requires quadratic execution costs")
    return _flat_rate(params)


def _shift_and_slope(t, k, gamma_sig2, rate, eta, horizon):
    """The correction w(t) >= 0 and its derivative for the flat/linear/
    quadratic case; the optimal inventory is q0*(1 - t/T) - q0*w(t)."""
    t = np.asarray(t, dtype=float)
    kappa = np.sqrt(gamma_sig2 * rate / (2.0 * eta))
    if kappa * horizon < _SMALL_KAPPA_T:
        # Series in kappa; the leading term is the risk-neutral parabola.
        base = k * rate / (4.0 * eta * horizon)
        corr = 1.0 + kappa ** 2 * (t * t - horizon * t - horizon * horizon) / 12.0
        w = base * t * (horizon - t) * corr
        wp = base * ((horizon - 2.0 * t) * corr
                     + t * (horizon - t) * kappa ** 2 * (2.0 * t - horizon) / 12.0)
        return w, wp
    amp = k / (gamma_sig2 * horizon)
    gap = np.tanh(0.5 * kappa * horizon) - np.tanh(0.5 * kappa * t)
    w = amp * np.sinh(kappa * t) * gap
    # sinh(kt) * sech^2(kt/2) = 2 tanh(kt/2) collapses the product rule.
    wp = amp * kappa * (np.cosh(kappa * t) * gap - np.tanh(0.5 * kappa * t))
    return w, wp


def almgren_chriss_curve(params: MarketParams, times: np.ndarray) -> TradingCurve:
    """Optimal curve for flat volume, linear impact f = k and quadratic cost,
    gamma > 0:  q(t) = q0 * (1 - t/T) - q0 * w(t)."""
    rate = _require_linear_quadratic(params)
    if params.gamma <= 0.0:
        raise ValueError("gamma must be > 0; use risk_neutral_curve for gamma = 0")
    t = np.asarray(times, dtype=float)
    w, wp = _shift_and_slope(t, params.impact.k, params.gamma * params.sigma ** 2,
                             rate, params.cost.eta, params.T)
    q = params.q0 * (1.0 - t / params.T) - params.q0 * w
    qdot = -params.q0 / params.T - params.q0 * wp
    p = 2.0 * params.cost.eta * qdot / rate
    return TradingCurve(t, q, p)


def almgren_chriss_premium(params: MarketParams, n: int = 20000) -> float:
    """Premium for the flat/linear/quadratic case, gamma > 0:

        pi = eta*q0^2/(V*T) + q0^2 * integral((eta/V) w'^2 - (k/T) w
                                              + (gamma sigma^2 / 2) w^2).
    """
    rate = _require_linear_quadratic(params)
    if params.gamma <= 0.0:
        raise ValueError("gamma must be > 0; use risk_neutral_premium for gamma = 0")
    gamma_sig2 = params.gamma * params.sigma ** 2
    t = np.linspace(0.0, params.T, n + 1)
    w, wp = _shift_and_slope(t, params.impact.k, gamma_sig2, rate,
                             params.cost.eta, params.T)
    integrand = (params.cost.eta / rate) * wp ** 2 \
        - (params.impact.k / params.T) * w + 0.5 * gamma_sig2 * w ** 2
    base = params.cost.eta * params.q0 ** 2 / (rate * params.T)
    return base + params.q0 ** 2 * _simpson(integrand, params.T / n)


def risk_neutral_curve(params: MarketParams, times: np.ndarray) -> TradingCurve:
    """gamma = 0 limit: q(t) = q0 * (1 - t/T) * (1 - k*V*t / (4*eta))."""
    rate = _require_linear_quadratic(params)
    if params.gamma != 0.0:
        raise ValueError("risk_neutral_curve requires gamma = 0")
    t = np.asarray(times, dtype=float)
    slope = params.impact.k * rate / (4.0 * params.cost.eta)
    q = params.q0 * (1.0 - t / params.T) * (1.0 - slope * t)
    qdot = params.q0 * (-(1.0 - slope * t) / params.T - slope * (1.0 - t / params.T))
    p = 2.0 * params.cost.eta * qdot / rate
    return TradingCurve(t, q, p)


def risk_neutral_premium(params: MarketParams) -> float:
    """gamma = 0 limit: pi = eta*q0^2/(V*T) - k^2*V*T*q0^2 / (48*eta)."""
    rate = _require_linear_quadratic(params)
    if params.gamma != 0.0:
        raise ValueError("risk_neutral_premium requires gamma = 0")
    eta, k, q0 = params.cost.eta, params.impact.k, params.q0
    return eta * q0 ** 2 / (rate * params.T) - k ** 2 * rate * params.T * q0 ** 2 / (48.0 * eta)


def _simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson rule on a uniform grid (even interval count)."""
    n = values.size - 1
    if n % 2 != 0:
        raise ValueError("Simpson rule needs an even number of intervals")
    return (h / 3.0) * (values[0] + values[-1]
                        + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum())
