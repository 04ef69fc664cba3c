"""Timing comparison of the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py

The script benches the backend selected by the environment, then re-invokes
itself in a subprocess with VWAPGUARD_PURE_NUMPY=1 to bench the fallback and
prints both. Results also cross-check that the two paths agree numerically.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from vwapguard import (  # noqa: E402
    AdaptedPerturbation,
    CostSpec,
    ImpactSpec,
    MarketParams,
    SimulationSpec,
    SolverConfig,
    VolumeProfile,
    simulate_slippage,
    solve,
    utility_comparison,
)
from vwapguard import _kernels  # noqa: E402


def _params():
    return MarketParams(
        q0=4e5, T=1.0, S0=50.0, sigma=0.45, gamma=3e-6,
        cost=CostSpec.power_law(0.12, 0.63),
        impact=ImpactSpec.linear(5e-7),
        volume=VolumeProfile.flat(4e6, 1.0),
    )


def _bench(fn, repeat=5):
    fn()  # warm-up (and JIT compile on the numba path)
    best = min(_timed(fn) for _ in range(repeat))
    return best


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_suite():
    params = _params()
    cfg = SolverConfig(J=2000)
    curve, _ = solve(params, cfg)
    sim_full = SimulationSpec(n_paths=2000, seed=7, steps=4000, mode="full")
    sim_util = SimulationSpec(n_paths=4000, seed=9, steps=2000)
    policies = [("optimal", curve), ("tilted", AdaptedPerturbation(curve, 0.03))]

    results = {
        "backend": _kernels.backend(),
        "solve_J2000_s": _bench(lambda: solve(params, cfg)),
        "full_sim_2000x4000_s": _bench(lambda: simulate_slippage(params, curve, sim_full)),
        "utility_2pol_4000x2000_s": _bench(
            lambda: utility_comparison(params, policies, sim_util)),
        "checks": {
            "premium_like_mean": float(np.mean(
                simulate_slippage(params, curve, sim_full).values)),
            "utility_opt": utility_comparison(params, policies, sim_util)[0].utility,
        },
    }
    return results


def main():
    mine = run_suite()
    if os.environ.get("_VWAPGUARD_BENCH_CHILD"):
        print(json.dumps(mine))
        return

    rows = [mine]
    if _kernels.USE_NUMBA:
        env = dict(os.environ, VWAPGUARD_PURE_NUMPY="1", _VWAPGUARD_BENCH_CHILD="1")
        out = subprocess.run([sys.executable, os.path.abspath(__file__)],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    header = f"{'kernel':32s}" + "".join(f"{r['backend']:>14s}" for r in rows)
    print(header)
    print("-" * len(header))
    for key in ("solve_J2000_s", "full_sim_2000x4000_s", "utility_2pol_4000x2000_s"):
        line = f"{key:32s}" + "".join(f"{r[key]:14.5f}" for r in rows)
        print(line)
    if len(rows) == 2:
        a, b = rows[0]["checks"], rows[1]["checks"]
        for key in a:
            rel = abs(a[key] - b[key]) / max(abs(a[key]), 1e-30)
            status = "ok" if rel < 1e-9 else f"MISMATCH ({rel:.2e})"
            print(f"cross-check {key}: {status}")


if __name__ == "__main__":
    main()
