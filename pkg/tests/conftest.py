"""Shared parameter builders for the test suite."""

import numpy as np

from vwapguard import CostSpec, ImpactSpec, MarketParams, VolumeProfile

# Baseline case used throughout: 400k shares over one day against a flat
# 4M-share/day tape, quadratic costs, linear permanent impact.
Q0 = 4e5
HORIZON = 1.0
S0 = 50.0
SIGMA = 0.45
ETA = 0.15
K_LIN = 5e-7
V_FLAT = 4e6
NOTIONAL = Q0 * S0


def baseline(gamma=3e-6, k=K_LIN, cost=None, impact=None, volume=None, sigma=SIGMA):
    return MarketParams(
        q0=Q0, T=HORIZON, S0=S0, sigma=sigma, gamma=gamma,
        cost=cost if cost is not None else CostSpec.quadratic(ETA),
        impact=impact if impact is not None else ImpactSpec.linear(k),
        volume=volume if volume is not None else VolumeProfile.flat(V_FLAT, HORIZON),
    )


def zero_impact(gamma=3e-6, volume=None):
    return baseline(gamma=gamma, impact=ImpactSpec.zero(), volume=volume)


def two_bucket_volume():
    return VolumeProfile.table([0.0, 0.5], [2e6, 6e6], HORIZON)


def nonlinear_costs(gamma=3e-6):
    """Power-law costs with linear impact (no closed form)."""
    return baseline(gamma=gamma, cost=CostSpec.power_law(0.12, 0.63))


def nonlinear_impact(gamma=3e-6):
    """Power-law costs and power-law impact (the hardest shipped case)."""
    return baseline(gamma=gamma, cost=CostSpec.power_law(0.12, 0.63),
                    impact=ImpactSpec.power(2.2e-4, 0.6))


def admissible_random_curves(params, times, n, seed):
    """Smooth random curves with the exact boundary values: the tracking
    curve plus a few boundary-vanishing sine modes."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    base = params.q0 * (1.0 - params.volume.cumulative(times) / params.volume.total)
    out = []
    x = times / params.T
    for _ in range(n):
        coeffs = rng.uniform(-0.1, 0.1, size=4)
        bump = sum(c * np.sin((m + 1) * np.pi * x) for m, c in enumerate(coeffs))
        out.append(base + params.q0 * bump)
    return out
