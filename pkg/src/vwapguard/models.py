"""Market-model primitives: execution-cost functions, permanent price impact
and market-volume profiles, together with the calculus the solver and the
pricing layers need (derivatives, antiderivatives, convex conjugates).

Units: quantities in shares, time in days, prices and costs in currency.
All types are frozen after construction and every method is a pure function,
so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

__all__ = [
    "CostSpec",
    "ImpactSpec",
    "VolumeProfile",
    "MarketParams",
]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class CostSpec:
    """Execution-cost function L(rho) of the participation rate rho = v/V.

    L(rho) = eta * |rho|**(1 + phi) + psi * |rho|, in currency per share.
    Quadratic costs are the phi = 1, psi = 0 case.  L is even, vanishes at
    zero, is strictly convex and grows superlinearly, so its convex conjugate
    H(p) = sup_rho (rho * p - L(rho)) is finite and differentiable; H' maps
    an adjoint value to the optimal trade rate per unit of market volume.
    """

    eta: float
    phi: float = 1.0
    psi: float = 0.0
    kind: str = "quadratic"

    @classmethod
    def quadratic(cls, eta: float) -> "CostSpec":
        return cls(eta=float(eta), phi=1.0, psi=0.0, kind="quadratic")

    @classmethod
    def power_law(cls, eta: float, phi: float) -> "CostSpec":
        return cls(eta=float(eta), phi=float(phi), psi=0.0, kind="power")

    @classmethod
    def power_law_plus_linear(cls, eta: float, phi: float, psi: float) -> "CostSpec":
        return cls(eta=float(eta), phi=float(phi), psi=float(psi), kind="power_linear")

    def __post_init__(self):
        _require(self.kind in ("quadratic", "power", "power_linear"),
                 f"unknown cost kind {self.kind!r}")
        _require(self.eta > 0.0, "cost eta must be > 0")
        _require(self.phi > 0.0, "cost phi must be > 0")
        _require(self.psi >= 0.0, "cost psi must be >= 0")
        if self.kind == "quadratic":
            _require(self.phi == 1.0 and self.psi == 0.0,
                     "quadratic cost requires phi = 1 and psi = 0")
        if self.kind == "power":
            _require(self.psi == 0.0, "power-law cost requires psi = 0")

    # -- primal ------------------------------------------------------------

    def cost(self, rho):
        """L(rho), currency per share."""
        a = np.abs(rho)
        core = a * a if self.phi == 1.0 else a ** (1.0 + self.phi)
        return self.eta * core + self.psi * a

    def marginal_cost(self, rho):
        """L'(rho); the psi kink at rho = 0 is resolved to 0 there."""
        a = np.abs(rho)
        core = a if self.phi == 1.0 else a ** self.phi
        return np.sign(rho) * (self.eta * (1.0 + self.phi) * core + self.psi)

    # -- conjugate ---------------------------------------------------------

    def _shifted(self, p):
        # Linear part of L only shifts the conjugate: soft-threshold by psi.
        return np.maximum(np.abs(np.asarray(p, dtype=float)) - self.psi, 0.0)

    def conjugate(self, p):
        """H(p) = sup_rho (rho * p - L(rho))."""
        c = (1.0 + self.phi) * self.eta
        s = self._shifted(p) / c
        core = s * s if self.phi == 1.0 else s ** ((1.0 + self.phi) / self.phi)
        return self.phi * self.eta * core

    def conjugate_grad(self, p):
        """H'(p), the cost-optimal participation rate for adjoint p."""
        c = (1.0 + self.phi) * self.eta
        s = self._shifted(p) / c
        core = s if self.phi == 1.0 else s ** (1.0 / self.phi)
        return np.sign(p) * core

    def conjugate_hess(self, p):
        """H''(p) where it exists (for phi > 1 it diverges at the kink)."""
        c = (1.0 + self.phi) * self.eta
        s = self._shifted(p)
        if self.phi == 1.0:
            out = np.full_like(s, 1.0 / (self.phi * c))
        else:
            expo = (1.0 - self.phi) / self.phi
            with np.errstate(divide="ignore"):
                out = np.power(s / c, expo) / (self.phi * c)
        if self.psi > 0.0:
            out = np.where(s > 0.0, out, 0.0)
        return out

    def conjugate_hess_floored(self, p, p_floor: float = 1e-12):
        """H'' regularized away from its degenerate value at p = 0.

        The Newton linearization divides by nothing but multiplies by H'',
        so a vanishing H'' can stall the shooting solve; flooring at the
        value a tiny adjoint gives keeps the linear system well posed.
        """
        return np.maximum(self.conjugate_hess(p), self.conjugate_hess(p_floor))


@dataclass(frozen=True)
class ImpactSpec:
    """Permanent-impact function f(q) >= 0, nonincreasing in the executed
    quantity q > 0, with antiderivative F(q) = integral of f(|z|) from 0 to q
    (odd in q).

    kinds: "zero" (f = 0), "linear" (f = k, F = k*q), and "power"
    (f(q) = k*alpha*q**(alpha-1), F(q) = k*q**alpha with 0 < alpha < 1,
    which blows up at q = 0+ but stays integrable).
    """

    kind: str = "zero"
    k: float = 0.0
    alpha: float = 1.0

    @classmethod
    def zero(cls) -> "ImpactSpec":
        return cls(kind="zero", k=0.0, alpha=1.0)

    @classmethod
    def linear(cls, k: float) -> "ImpactSpec":
        return cls(kind="linear", k=float(k), alpha=1.0)

    @classmethod
    def power(cls, k: float, alpha: float) -> "ImpactSpec":
        return cls(kind="power", k=float(k), alpha=float(alpha))

    def __post_init__(self):
        _require(self.kind in ("zero", "linear", "power"),
                 f"unknown impact kind {self.kind!r}")
        _require(self.k >= 0.0, "impact k must be >= 0")
        if self.kind == "zero":
            _require(self.k == 0.0, "zero impact requires k = 0")
        if self.kind == "power":
            _require(0.0 < self.alpha < 1.0, "power impact requires alpha in (0, 1)")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.k == 0.0

    def impact(self, x):
        """f(x) for x >= 0 (callers pass |q0 - q|)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                return self.k * self.alpha * x ** (self.alpha - 1.0)
        if self.kind == "linear":
            return np.full_like(x, self.k)
        return np.zeros_like(x)

    def impact_integral(self, q):
        """F(q), odd in q."""
        q = np.asarray(q, dtype=float)
        if self.kind == "power":
            return np.sign(q) * self.k * np.abs(q) ** self.alpha
        if self.kind == "linear":
            return self.k * q
        return np.zeros_like(q)

    def impact_slope(self, x):
        """f'(x) for x > 0; diverges at 0+ for the power kind."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                return self.k * self.alpha * (self.alpha - 1.0) * x ** (self.alpha - 2.0)
        return np.zeros_like(x)

    def double_integral(self, q0: float) -> float:
        """Integral of F(z) over z in [0, q0], in currency."""
        _require(q0 >= 0.0, "q0 must be >= 0")
        if self.kind == "power":
            return self.k * q0 ** (1.0 + self.alpha) / (1.0 + self.alpha)
        if self.kind == "linear":
            return 0.5 * self.k * q0 * q0
        return 0.0


@dataclass(frozen=True)
class VolumeProfile:
    """Deterministic instantaneous market volume on [0, horizon], in shares
    per day, piecewise constant between bucket boundaries.

    `grid`, `v_nodes` and `q_nodes` expose the node times, per-node rates and
    the cumulative traded volume at the nodes; `cumulative` integrates the
    step function exactly at any interior time.
    """

    boundaries: np.ndarray
    bucket_rates: np.ndarray
    _bucket_cum: np.ndarray = field(init=False, repr=False, compare=False)

    @classmethod
    def flat(cls, rate: float, horizon: float) -> "VolumeProfile":
        return cls(np.array([0.0, float(horizon)]), np.array([float(rate)]))

    @classmethod
    def table(cls, times, rates, horizon: float) -> "VolumeProfile":
        """Bucket start times (first must be 0) with one rate per bucket."""
        times = np.asarray(times, dtype=float)
        rates = np.asarray(rates, dtype=float)
        _require(times.ndim == 1 and times.size >= 1, "need at least one bucket")
        _require(times.size == rates.size, "times and rates must have equal length")
        _require(times[0] == 0.0, "first bucket must start at time 0")
        _require(np.all(times < horizon), "bucket starts must lie before the horizon")
        return cls(np.concatenate([times, [float(horizon)]]), rates)

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        r = np.asarray(self.bucket_rates, dtype=float)
        _require(b.ndim == 1 and b.size >= 2, "need at least one bucket")
        _require(r.size == b.size - 1, "one rate per bucket required")
        _require(b[0] == 0.0, "profile must start at time 0")
        _require(bool(np.all(np.diff(b) > 0.0)), "bucket boundaries must increase")
        _require(bool(np.all(np.isfinite(r)) and np.all(r > 0.0)),
                 "volume rates must be finite and strictly positive")
        cum = np.concatenate([[0.0], np.cumsum(r * np.diff(b))])
        for name, arr in (("boundaries", b), ("bucket_rates", r), ("_bucket_cum", cum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> float:
        return float(self.boundaries[-1])

    @property
    def total(self) -> float:
        """Cumulative volume over the whole horizon, Q_T."""
        return float(self._bucket_cum[-1])

    @property
    def vmin(self) -> float:
        return float(np.min(self.bucket_rates))

    @property
    def vmax(self) -> float:
        return float(np.max(self.bucket_rates))

    @property
    def grid(self) -> np.ndarray:
        return self.boundaries

    @property
    def v_nodes(self) -> np.ndarray:
        """Rate at each node (right-continuous; the last node repeats)."""
        return np.concatenate([self.bucket_rates, self.bucket_rates[-1:]])

    @property
    def q_nodes(self) -> np.ndarray:
        return self._bucket_cum

    def _bucket_index(self, t: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.boundaries, t, side="right") - 1,
                       0, self.bucket_rates.size - 1)

    def value_at(self, t):
        """Instantaneous rate at time t, 0 <= t <= horizon."""
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        return self.bucket_rates[self._bucket_index(t)]

    def cumulative(self, t):
        """Exact integral of the rate from 0 to t, in shares."""
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        i = self._bucket_index(t)
        return self._bucket_cum[i] + self.bucket_rates[i] * (t - self.boundaries[i])

    def interval_rates(self, times: np.ndarray) -> np.ndarray:
        """Average rate over each interval of a strictly increasing grid
        spanning [0, horizon]; equals the bucket rate wherever the grid does
        not straddle a bucket boundary."""
        times = np.asarray(times, dtype=float)
        _require(times.ndim == 1 and times.size >= 2, "grid needs >= 2 nodes")
        _require(bool(np.all(np.diff(times) > 0.0)), "grid times must increase")
        _require(abs(times[0]) <= 1e-12 * self.horizon, "grid must start at 0")
        _require(abs(times[-1] - self.horizon) <= 1e-9 * self.horizon,
                 "grid must end at the horizon")
        q = self.cumulative(np.clip(times, 0.0, self.horizon))
        return np.diff(q) / np.diff(times)

    def _check_range(self, t: np.ndarray) -> None:
        if np.any(t < 0.0) or np.any(t > self.horizon * (1.0 + 1e-12)):
            raise ValueError(f"time outside [0, {self.horizon}]")


@dataclass(frozen=True)
class MarketParams:
    """Full description of one guaranteed-VWAP liquidation problem.

    q0      shares to sell over [0, T]
    T       horizon in days (must match the volume profile)
    S0      initial price, currency per share
    sigma   volatility, currency per share per sqrt(day)
    gamma   absolute risk aversion, 1/currency (0 = risk neutral)
    """

    q0: float
    T: float
    S0: float
    sigma: float
    gamma: float
    cost: CostSpec
    impact: ImpactSpec
    volume: VolumeProfile

    def __post_init__(self):
        _require(self.q0 > 0.0, "q0 must be > 0")
        _require(self.T > 0.0, "T must be > 0")
        _require(self.S0 > 0.0, "S0 must be > 0")
        _require(self.sigma > 0.0, "sigma must be > 0")
        _require(self.gamma >= 0.0, "gamma must be >= 0")
        _require(abs(self.volume.horizon - self.T) <= 1e-9 * self.T,
                 "volume profile horizon must equal T")

    def grid_times(self, steps: int) -> np.ndarray:
        return np.linspace(0.0, self.T, steps + 1)
