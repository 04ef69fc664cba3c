"""Newton solver for the discrete first-order system characterizing the
optimal liquidation curve under a guaranteed-VWAP objective.

On the grid {0, tau, ..., T = J*tau} the unknown curve q (with q_0 = q0,
q_J = 0) and adjoint p satisfy

    p_{j+1} = p_j + tau * (gamma*sigma^2 * (q_{j+1} - q0*(1-lam)*(1 - Q_{j+1}/Q_J))
                           + q0*(1-lam) * (V_{j+1}/Q_J) * f(|q0 - q_{j+1}|))
    q_{j+1} = q_j + tau * V_{j+1} * H'(p_j)

where V_{j+1} is the volume rate over the step to node j+1, Q the cumulative
volume under the matching left-rectangle rule, H the conjugate of the cost
function, and lam the relative-pricing factor (0 for absolute pricing).

The adjoint is never an independent unknown: at every iterate p is
regenerated from q by its forward recursion seeded with
p_0 = L'((q_1 - q_0) / (tau * V_1)), which makes the p-equations hold
exactly; Newton acts on the q-equation defect alone.  The linearized system
is solved by linear shooting on the starting adjoint increment (two forward
sweeps and one scalar division).
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import _kernels
from .closed_forms import TradingCurve
from .models import MarketParams

__all__ = [
    "SolverConfig",
    "SolverDiagnostics",
    "SolverError",
    "NonConvergenceError",
    "SingularSystemError",
    "ImpactDerivativeError",
    "GridMismatchError",
    "solve",
    "residual",
    "newton_step",
]

# Jacobian guards: the impact slope is evaluated no closer to the q = q0
# singularity than SLOPE_FLOOR_REL * q0, and the impact level itself no
# closer than ARG_FLOOR_REL * q0 (only the power kind ever needs either).
_SLOPE_FLOOR_REL = 1e-8
_ARG_FLOOR_REL = 1e-12
_TOUCH_EPS_REL = 1e-9
_SHOOT_EPS = 1e-14


class SolverError(RuntimeError):
    pass


class NonConvergenceError(SolverError):
    """Newton iteration hit its cap (or stalled) above tolerance."""

    def __init__(self, final_residual: float, curve=None, diagnostics=None):
        super().__init__(f"solver did not converge: residual {final_residual:.6g} shares")
        self.final_residual = final_residual
        self.curve = curve
        self.diagnostics = diagnostics


class SingularSystemError(SolverError):
    """The shooting denominator of the Newton linear system vanished."""


class ImpactDerivativeError(SolverError):
    """The impact derivative could not be evaluated where the Jacobian needs it."""


class GridMismatchError(ValueError):
    """Curve grid does not match the solver grid."""


@dataclass(frozen=True)
class SolverConfig:
    """Grid size, stopping rule and damping for one solve.

    tol is the sup-norm residual tolerance in shares (default 1e-6 * q0);
    lam is the relative-pricing factor, 0 for absolute pricing.
    """

    J: int = 2000
    tol: float | None = None
    max_iter: int = 50
    damping: int = 20
    lam: float = 0.0

    def __post_init__(self):
        if self.J < 2:
            raise ValueError("J must be >= 2")
        if self.tol is not None and self.tol <= 0.0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")
        if self.lam > 1.0:
            raise ValueError("lam must be <= 1")

    def resolved_tol(self, q0: float) -> float:
        return self.tol if self.tol is not None else 1e-6 * q0


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    oversell_detected: bool
    touched_q0: bool


class _Grid:
    """Per-solve precomputation shared by the recursion and the Jacobian."""

    def __init__(self, params: MarketParams, J: int, lam: float):
        self.params = params
        self.J = J
        self.lam = lam
        self.times = params.grid_times(J)
        self.tau = params.T / J
        self.vstep = params.volume.interval_rates(self.times)
        self.qcum = np.concatenate([[0.0], np.cumsum(self.tau * self.vstep)])
        self.qtot = self.qcum[-1]
        scale = params.q0 * (1.0 - lam)
        # Per-step coefficients, indexed by the node j+1 they act on.
        self.target_r = scale * (1.0 - self.qcum[1:] / self.qtot)
        self.rebate_r = scale * self.vstep / self.qtot
        self.gamma_sig2 = params.gamma * params.sigma ** 2

    def propagate_adjoint(self, q: np.ndarray) -> np.ndarray:
        params = self.params
        rho0 = (q[1] - q[0]) / (self.tau * self.vstep[0])
        p0 = float(params.cost.marginal_cost(rho0))
        gap = np.maximum(np.abs(params.q0 - q[1:]), _ARG_FLOOR_REL * params.q0)
        inc = self.tau * (self.gamma_sig2 * (q[1:] - self.target_r)
                          + self.rebate_r * params.impact.impact(gap))
        p = np.empty(self.J + 1)
        p[0] = p0
        p[1:] = p0 + np.cumsum(inc)
        return p

    def defect(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        rate = self.params.cost.conjugate_grad(p[:-1])
        return q[1:] - q[:-1] - self.tau * self.vstep * rate

    def jacobian_coeffs(self, q: np.ndarray, p: np.ndarray):
        params = self.params
        q0 = params.q0
        gap = np.maximum(np.abs(q0 - q[1:]), _SLOPE_FLOOR_REL * q0)
        slope = params.impact.impact_slope(gap)
        if not np.all(np.isfinite(slope)):
            raise ImpactDerivativeError("impact derivative not finite on the grid")
        sgn = np.sign(q0 - q[1:])
        a = self.tau * (self.gamma_sig2 * q0
                        - sgn * q0 * q0 * (1.0 - self.lam) * (self.vstep / self.qtot) * slope)
        b = self.tau * (self.vstep / q0) * params.cost.conjugate_hess_floored(p[:-1])
        return np.ascontiguousarray(a), np.ascontiguousarray(b)


def _direction(grid: _Grid, q: np.ndarray, p: np.ndarray, defect: np.ndarray) -> np.ndarray:
    a, b = grid.jacobian_coeffs(q, p)
    rr = np.ascontiguousarray(defect / grid.params.q0)
    dqa, dqb = _kernels.newton_sweeps(a, b, rr)
    denom = dqb[-1] - dqa[-1]
    if abs(denom) < _SHOOT_EPS:
        raise SingularSystemError(f"shooting denominator {denom:.3e} below {_SHOOT_EPS}")
    dp0 = -dqa[-1] / denom
    dq = dqa + dp0 * (dqb - dqa)
    dq[0] = 0.0
    dq[-1] = 0.0
    return dq


def _diagnostics(q: np.ndarray, q0: float, iterations: int, res: float,
                 converged: bool) -> SolverDiagnostics:
    return SolverDiagnostics(
        iterations=iterations,
        final_residual=res,
        converged=converged,
        oversell_detected=bool(np.min(q) < 0.0),
        touched_q0=bool(np.any(q[1:-1] >= q0 * (1.0 - _TOUCH_EPS_REL))),
    )


def solve(params: MarketParams, config: SolverConfig = SolverConfig()):
    """Solve the discrete system; returns (TradingCurve, SolverDiagnostics).

    Raises NonConvergenceError (carrying the last iterate and diagnostics)
    after max_iter Newton updates, or if damping cannot find a residual
    reduction; SingularSystemError if the shooting solve degenerates.
    """
    grid = _Grid(params, config.J, config.lam)
    tol = config.resolved_tol(params.q0)
    q0 = params.q0

    q = q0 * (1.0 - grid.qcum / grid.qtot)
    q[0] = q0
    q[-1] = 0.0
    p = grid.propagate_adjoint(q)
    r = grid.defect(q, p)
    res = float(np.max(np.abs(r)))

    iterations = 0
    while res > tol:
        if iterations >= config.max_iter:
            diags = _diagnostics(q, q0, iterations, res, False)
            raise NonConvergenceError(res, TradingCurve(grid.times, q, p), diags)
        dq = _direction(grid, q, p, r)
        step = 1.0
        accepted = False
        for _ in range(config.damping + 1):
            q_new = q + q0 * step * dq
            q_new[0] = q0
            q_new[-1] = 0.0
            p_new = grid.propagate_adjoint(q_new)
            r_new = grid.defect(q_new, p_new)
            res_new = float(np.max(np.abs(r_new)))
            if res_new < res:
                q, p, r, res = q_new, p_new, r_new, res_new
                accepted = True
                break
            step *= 0.5
        iterations += 1
        if not accepted:
            diags = _diagnostics(q, q0, iterations, res, False)
            raise NonConvergenceError(res, TradingCurve(grid.times, q, p), diags)

    curve = TradingCurve(grid.times, q, p)
    return curve, _diagnostics(q, q0, iterations, res, True)


def _check_grid(grid: _Grid, curve: TradingCurve) -> None:
    if curve.times.size != grid.times.size:
        raise GridMismatchError(f"curve has {curve.times.size - 1} steps, config wants {grid.J}")
    if not np.allclose(curve.times, grid.times, rtol=0.0, atol=1e-12 * grid.params.T):
        raise GridMismatchError("curve grid does not match the solver grid")


def residual(params: MarketParams, config: SolverConfig, curve: TradingCurve) -> float:
    """Sup-norm q-equation defect of a curve, in shares.

    The adjoint is regenerated from q by its forward recursion, so the
    p-equations hold exactly and the defect isolates the q-recursion.
    """
    grid = _Grid(params, config.J, config.lam)
    _check_grid(grid, curve)
    p = grid.propagate_adjoint(curve.q)
    return float(np.max(np.abs(grid.defect(curve.q, p))))


def newton_step(params: MarketParams, config: SolverConfig,
                q: np.ndarray, p: np.ndarray):
    """One undamped Newton update from the iterate (q, p).

    Returns (q_next, p_next) with p_next regenerated from q_next.
    """
    grid = _Grid(params, config.J, config.lam)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.size != grid.J + 1 or p.size != grid.J + 1:
        raise GridMismatchError("iterate arrays do not match the solver grid")
    r = grid.defect(q, p)
    dq = _direction(grid, q, p, r)
    q_next = q + params.q0 * dq
    q_next[0] = params.q0
    q_next[-1] = 0.0
    return q_next, grid.propagate_adjoint(q_next)
