"""Monte Carlo verification: samples the slippage distribution of a trading
curve, cross-checks the pathwise slippage identity by full price-path
simulation, and probes the optimality of deterministic schedules against
adapted perturbations.

Paths are driven by a counter-based Philox generator keyed by
(seed, path index), so samples are reproducible regardless of how the path
loop is scheduled or blocked.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import _kernels
from .closed_forms import TradingCurve
from .models import MarketParams

__all__ = [
    "SimulationSpec",
    "SlippageSample",
    "AdaptedPerturbation",
    "PolicyUtility",
    "simulate_slippage",
    "utility_comparison",
]

_MODES = ("formula", "full")
# Paths are processed in blocks bounded to roughly this many doubles.
_BLOCK_BUDGET = 8_000_000


@dataclass(frozen=True)
class SimulationSpec:
    """n_paths, seed, simulation grid size and mode ("formula" or "full").

    "formula" draws the Gaussian slippage of the pathwise identity directly:
    deterministic terms plus the stochastic integral with its left-node
    integrand.  "full" simulates the price by Euler and accumulates the cash
    account and the VWAP from the path itself.
    """

    n_paths: int
    seed: int
    steps: int
    mode: str = "formula"

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")


@dataclass(frozen=True)
class SlippageSample:
    values: np.ndarray
    sample_mean: float
    sample_var: float
    standard_error: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> "SlippageSample":
        values = np.asarray(values, dtype=float)
        values.setflags(write=False)
        n = values.size
        mean = float(np.mean(values))
        var = float(np.var(values, ddof=1)) if n > 1 else 0.0
        return cls(values, mean, var, float(np.sqrt(var / n)))


@dataclass(frozen=True)
class AdaptedPerturbation:
    """Adapted policy: the base schedule plus a W-feedback trade-rate tilt.

    Over the first half of the horizon the extra rate is
    gain * (q0/T) * W_t * (T - t)/T (clipped at 3x its scale so admissibility
    holds); over the second half a constant, F_{T/2}-measurable unwind rate
    returns the inventory deviation to zero exactly at T.
    """

    base: TradingCurve
    gain: float


@dataclass(frozen=True)
class PolicyUtility:
    label: str
    utility: float
    std_error: float
    mean_slippage: float


def _path_normals(seed: int, first: int, count: int, steps: int) -> np.ndarray:
    # One Philox stream per path, keyed by (seed, path index).  Resetting the
    # state of a single bit generator reproduces the per-path construction
    # bit for bit while skipping most of its overhead.
    out = np.empty((count, steps))
    bg = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64))
    gen = np.random.Generator(bg)
    template = bg.state
    template["buffer_pos"] = 4
    template["has_uint32"] = 0
    template["uinteger"] = 0
    for i in range(count):
        template["state"] = {"counter": np.zeros(4, dtype=np.uint64),
                             "key": np.array([seed, first + i], dtype=np.uint64)}
        bg.state = template
        gen.standard_normal(steps, out=out[i])
    return out


def _block_sizes(n_paths: int, steps: int):
    block = max(1, min(n_paths, _BLOCK_BUDGET // max(steps, 1)))
    start = 0
    while start < n_paths:
        stop = min(start + block, n_paths)
        yield start, stop
        start = stop


def _row_dots(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    # One fixed-length dot per row: unlike a matrix-vector product, the
    # summation order then cannot depend on how paths are blocked.
    out = np.empty(mat.shape[0])
    for i in range(mat.shape[0]):
        out[i] = np.dot(mat[i], vec)
    return out


class _FineModel:
    """Curve, volume and quadrature weights resampled to the simulation grid."""

    def __init__(self, params: MarketParams, curve: TradingCurve, steps: int):
        j = curve.steps
        if steps < j or steps % j != 0:
            raise ValueError(f"steps ({steps}) must be a multiple of the curve grid ({j})")
        self.params = params
        self.steps = steps
        self.tau = params.T / steps
        self.times = params.grid_times(steps)
        fine = curve.resample(self.times)
        self.q = fine.q
        self.sell_rate = -np.diff(self.q) / self.tau
        self.vstep = params.volume.interval_rates(self.times)
        self.qcum = np.concatenate([[0.0], np.cumsum(self.tau * self.vstep)])
        self.qtot = self.qcum[-1]
        # Left-node integrand of the stochastic slippage integral.
        self.g_left = self.q[:-1] / params.q0 - (1.0 - self.qcum[:-1] / self.qtot)
        self.lcost = float(np.sum(self.tau * self.vstep
                                  * params.cost.cost(self.sell_rate / self.vstep)))
        rebate = float(np.sum(self.tau * params.q0 * (self.vstep / self.qtot)
                              * params.impact.impact_integral(params.q0 - self.q[:-1])))
        self.det_mean = -params.impact.double_integral(params.q0) - self.lcost + rebate

    def stoch_weights(self) -> np.ndarray:
        return (self.params.sigma * np.sqrt(self.tau) * self.params.q0) * self.g_left

    def euler_inputs(self):
        params = self.params
        gap = np.maximum(np.abs(params.q0 - self.q[:-1]), 1e-12 * params.q0)
        drift = params.impact.impact(gap) * self.sell_rate * self.tau
        wslip = self.sell_rate * self.tau \
            - params.q0 * (self.vstep * self.tau) / self.qtot
        return np.ascontiguousarray(drift), np.ascontiguousarray(wslip)


def simulate_slippage(params: MarketParams, curve: TradingCurve,
                      spec: SimulationSpec) -> SlippageSample:
    """Sample the terminal slippage of a deterministic curve."""
    model = _FineModel(params, curve, spec.steps)
    values = np.empty(spec.n_paths)
    if spec.mode == "formula":
        gw = model.stoch_weights()
        for lo, hi in _block_sizes(spec.n_paths, spec.steps):
            dw = _path_normals(spec.seed, lo, hi - lo, spec.steps)
            values[lo:hi] = model.det_mean + _row_dots(dw, gw)
    else:
        drift, wslip = model.euler_inputs()
        vol_step = params.sigma * np.sqrt(model.tau)
        for lo, hi in _block_sizes(spec.n_paths, spec.steps):
            dw = _path_normals(spec.seed, lo, hi - lo, spec.steps)
            values[lo:hi] = _kernels.full_sim_slippage(
                dw, drift, wslip, vol_step, params.S0, model.lcost)
    return SlippageSample.from_values(values)


_IMPACT_CODE = {"zero": 0, "linear": 1, "power": 2}


def _policy_slippage(fine: _FineModel, gain: float | None, dw: np.ndarray) -> np.ndarray:
    """Per-path slippage via the pathwise identity, under the given
    standard-normal increments; gain is None for a deterministic curve."""
    params = fine.params
    if gain is None:
        return fine.det_mean + _row_dots(dw, fine.stoch_weights())
    cost, imp = params.cost, params.impact
    return _kernels.adapted_slippage(
        np.ascontiguousarray(dw), fine.q, fine.sell_rate, fine.vstep,
        fine.qcum, fine.times, float(gain), fine.tau, params.T, params.q0,
        fine.qtot, params.sigma, imp.double_integral(params.q0),
        cost.eta, cost.phi, cost.psi,
        _IMPACT_CODE[imp.kind], imp.k, imp.alpha)


def utility_comparison(params: MarketParams, policies,
                       spec: SimulationSpec) -> list[PolicyUtility]:
    """Estimate E[-exp(-gamma * slippage)] per policy with standard errors,
    under common random numbers across policies.

    policies: mapping label -> TradingCurve | AdaptedPerturbation, or a
    sequence of (label, policy) pairs.
    """
    if isinstance(policies, dict):
        items = list(policies.items())
    else:
        items = [(label, pol) for label, pol in policies]
    if not items:
        raise ValueError("need at least one policy")

    prepared = []
    for label, pol in items:
        if isinstance(pol, TradingCurve):
            prepared.append((label, _FineModel(params, pol, spec.steps), None))
        elif isinstance(pol, AdaptedPerturbation):
            prepared.append((label, _FineModel(params, pol.base, spec.steps), pol.gain))
        else:
            raise TypeError(f"unsupported policy type {type(pol).__name__}")

    k = len(prepared)
    s1 = np.zeros(k)
    s2 = np.zeros(k)
    slip_sum = np.zeros(k)
    for lo, hi in _block_sizes(spec.n_paths, spec.steps):
        dw = _path_normals(spec.seed, lo, hi - lo, spec.steps)
        for idx, (_, fine, gain) in enumerate(prepared):
            slip = _policy_slippage(fine, gain, dw)
            util = -np.exp(-params.gamma * slip)
            s1[idx] += util.sum()
            s2[idx] += (util * util).sum()
            slip_sum[idx] += slip.sum()

    n = spec.n_paths
    rows = []
    for idx, (label, _, _) in enumerate(prepared):
        mean = s1[idx] / n
        var = max(s2[idx] / n - mean * mean, 0.0) * (n / max(n - 1, 1))
        rows.append(PolicyUtility(label, float(mean), float(np.sqrt(var / n)),
                                  float(slip_sum[idx] / n)))
    return rows
