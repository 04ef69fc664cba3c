"""Hot numeric kernels, numba-compiled when available.

Set VWAPGUARD_PURE_NUMPY=1 to force the plain numpy/Python fallbacks.
Both paths compute the same quantities; see benchmarks/bench_kernels.py
for a timing comparison.
"""

import os

import numpy as np

_flag = os.environ.get("VWAPGUARD_PURE_NUMPY", "").strip().lower()
PURE_NUMPY = _flag in ("1", "true", "yes", "on")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not PURE_NUMPY


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _newton_sweeps(a, b, rr):
    # Coupled forward recursions of the linearized boundary-value system.
    # Linear in the starting adjoint increment, so two sweeps (start 0 and
    # start 1) pin down the shooting value by one scalar solve.
    n = a.shape[0]
    dqa = np.zeros(n + 1)
    dqb = np.zeros(n + 1)
    dpa = 0.0
    dpb = 1.0
    for j in range(n):
        dqa[j + 1] = dqa[j] + b[j] * dpa - rr[j]
        dpa = dpa + a[j] * dqa[j + 1]
        dqb[j + 1] = dqb[j] + b[j] * dpb - rr[j]
        dpb = dpb + a[j] * dqb[j + 1]
    return dqa, dqb


def _full_sim_slippage_loop(dw, drift, wslip, vol_step, s0, lcost):
    # Euler price paths, one path per row of dw.  Proceeds and the VWAP
    # numerator are weighted by wslip against the post-step price, which is
    # what makes the discrete summation-by-parts of the slippage exact.
    n_paths, n_steps = dw.shape
    out = np.empty(n_paths)
    for i in range(n_paths):
        s = s0
        acc = 0.0
        for m in range(n_steps):
            s = s + vol_step * dw[i, m] - drift[m]
            acc += s * wslip[m]
        out[i] = acc - lcost
    return out


def _full_sim_slippage_np(dw, drift, wslip, vol_step, s0, lcost):
    n_paths, n_steps = dw.shape
    s = np.full(n_paths, s0)
    acc = np.zeros(n_paths)
    for m in range(n_steps):
        s = s + vol_step * dw[:, m] - drift[m]
        acc += s * wslip[m]
    return acc - lcost


# Cost and impact functions in flat scalar-parameter form (eta/phi/psi;
# impact code 0 = zero, 1 = linear, 2 = power) so the path kernels stay
# free of Python objects.

def _cost_val(a, eta, phi, psi):
    if phi == 1.0:
        return eta * a * a + psi * a
    return eta * a ** (1.0 + phi) + psi * a


def _impact_int(q, icode, k, alpha):
    if icode == 1:
        return k * q
    if icode == 2:
        if q >= 0.0:
            return k * q ** alpha
        return -k * (-q) ** alpha
    return 0.0


def _adapted_slippage_loop(dw, base_q, base_rate, vstep, qcum, t, gain, tau,
                           horizon, q0, qtot, sigma, int_f,
                           eta, phi, psi, icode, k, alpha):
    # Base schedule plus an adapted W-feedback tilt over the first half of
    # the horizon, unwound at a constant (half-time-measurable) rate over the
    # second half; slippage via the pathwise identity with left-node Ito sums.
    n_paths, n_steps = dw.shape
    half = n_steps // 2
    sqrt_tau = np.sqrt(tau)
    scale = gain * q0 / horizon
    bound = 3.0 * abs(scale)
    out = np.empty(n_paths)
    for i in range(n_paths):
        w = 0.0
        dev = 0.0
        acc_cost = 0.0
        acc_rebate = 0.0
        acc_stoch = 0.0
        for m in range(half):
            u = scale * w * (horizon - t[m]) / horizon
            if u > bound:
                u = bound
            elif u < -bound:
                u = -bound
            qm = base_q[m] + dev
            rate = base_rate[m] + u
            acc_cost += vstep[m] * _cost_val(abs(rate) / vstep[m], eta, phi, psi)
            acc_rebate += vstep[m] * _impact_int(q0 - qm, icode, k, alpha)
            acc_stoch += (qm / q0 - (1.0 - qcum[m] / qtot)) * dw[i, m]
            dev -= tau * u
            w += sqrt_tau * dw[i, m]
        u = dev / (horizon - t[half])
        for m in range(half, n_steps):
            qm = base_q[m] + dev
            rate = base_rate[m] + u
            acc_cost += vstep[m] * _cost_val(abs(rate) / vstep[m], eta, phi, psi)
            acc_rebate += vstep[m] * _impact_int(q0 - qm, icode, k, alpha)
            acc_stoch += (qm / q0 - (1.0 - qcum[m] / qtot)) * dw[i, m]
            dev -= tau * u
        out[i] = (-int_f - tau * acc_cost + tau * (q0 / qtot) * acc_rebate
                  + sigma * q0 * sqrt_tau * acc_stoch)
    return out


def _adapted_slippage_np(dw, base_q, base_rate, vstep, qcum, t, gain, tau,
                         horizon, q0, qtot, sigma, int_f,
                         eta, phi, psi, icode, k, alpha):
    n_paths, n_steps = dw.shape
    half = n_steps // 2
    sqrt_tau = np.sqrt(tau)
    w_node = np.hstack([np.zeros((n_paths, 1)),
                        np.cumsum(dw[:, : n_steps - 1] * sqrt_tau, axis=1)])
    scale = gain * q0 / horizon
    u = np.zeros((n_paths, n_steps))
    u[:, :half] = np.clip(scale * w_node[:, :half] * (horizon - t[:half]) / horizon,
                          -3.0 * abs(scale), 3.0 * abs(scale))
    deficit = -tau * np.sum(u[:, :half], axis=1)
    u[:, half:] = (deficit / (horizon - t[half]))[:, None]

    rate = np.abs(base_rate + u)
    q = base_q[None, :-1] + np.hstack([np.zeros((n_paths, 1)),
                                       -tau * np.cumsum(u[:, :-1], axis=1)])
    if phi == 1.0:
        part = rate / vstep
        lcost = tau * np.sum(vstep * (eta * part * part + psi * part), axis=1)
    else:
        part = rate / vstep
        lcost = tau * np.sum(vstep * (eta * part ** (1.0 + phi) + psi * part), axis=1)
    gap = q0 - q
    if icode == 1:
        f_int = k * gap
    elif icode == 2:
        f_int = np.sign(gap) * k * np.abs(gap) ** alpha
    else:
        f_int = np.zeros_like(gap)
    rebate = tau * (q0 / qtot) * np.sum(vstep * f_int, axis=1)
    g = q / q0 - (1.0 - qcum[:-1] / qtot)
    stoch = sigma * q0 * sqrt_tau * np.sum(g * dw, axis=1)
    return -int_f - lcost + rebate + stoch


if USE_NUMBA:
    newton_sweeps = njit(cache=True)(_newton_sweeps)
    full_sim_slippage = njit(cache=True)(_full_sim_slippage_loop)
    _cost_val = njit(cache=True, inline="always")(_cost_val)
    _impact_int = njit(cache=True, inline="always")(_impact_int)
    adapted_slippage = njit(cache=True)(_adapted_slippage_loop)
else:
    newton_sweeps = _newton_sweeps
    full_sim_slippage = _full_sim_slippage_np
    adapted_slippage = _adapted_slippage_np
