import dataclasses

import numpy as np
import pytest

from vwapguard import (
    SolverConfig,
    adjust_for_own_volume,
    breakeven_gap,
    objective,
    own_volume_factor,
    premium,
    relative_premium,
    slippage_moments,
    tracking_curve,
)
from vwapguard.closed_forms import TradingCurve
from vwapguard.pricing import NoSignChangeError

from conftest import (
    HORIZON, NOTIONAL, Q0, SIGMA,
    admissible_random_curves, baseline, two_bucket_volume, zero_impact,
)

CFG = SolverConfig(J=2000)


class TestObjective:
    def test_tracking_zero_impact_is_flat_cost(self):
        for volume in (None, two_bucket_volume()):
            params = zero_impact(volume=volume)
            curve = tracking_curve(params, params.grid_times(2000))
            assert objective(params, curve) == pytest.approx(6000.0, rel=1e-12)

    def test_tracking_minimizes_when_riskless_and_impactless(self):
        params = zero_impact(gamma=0.0)
        t = params.grid_times(2000)
        track = tracking_curve(params, t)
        base = objective(params, track)
        for q in admissible_random_curves(params, t, 5, seed=21):
            assert objective(params, TradingCurve(t, q)) >= base - 1e-9

    def test_moment_identity(self):
        params = baseline()
        t = params.grid_times(500)
        f_int = params.impact.double_integral(Q0)
        for q in admissible_random_curves(params, t, 10, seed=5):
            curve = TradingCurve(t, q)
            mean, var = slippage_moments(params, curve)
            lhs = objective(params, curve)
            rhs = -(mean + f_int) + 0.5 * params.gamma * var
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_grid_agnostic_inputs(self):
        params = baseline(volume=two_bucket_volume())
        t = params.grid_times(1000)
        curve = tracking_curve(params, t)
        assert np.isfinite(objective(params, curve, lam=0.25))


class TestSlippageMoments:
    def test_tracking_zero_impact(self):
        params = zero_impact()
        curve = tracking_curve(params, params.grid_times(2000))
        mean, var = slippage_moments(params, curve)
        assert mean == pytest.approx(-6000.0, rel=1e-12)
        assert var == pytest.approx(0.0, abs=1e-12)

    def test_front_loaded_variance(self):
        params = zero_impact()
        t = params.grid_times(2000)
        curve = TradingCurve(t, Q0 * (1 - t / HORIZON) ** 2)
        _, var = slippage_moments(params, curve)
        assert var == pytest.approx(SIGMA ** 2 * Q0 ** 2 * HORIZON / 30.0, rel=1e-9)


class TestPremium:
    def test_benchmark_table(self):
        rep3 = premium(baseline(gamma=3e-6), CFG)
        rep6 = premium(baseline(gamma=6e-6), CFG)
        assert rep3.naive_premium_bps == pytest.approx(3.0, abs=0.1)
        assert rep3.premium_bps == pytest.approx(-3.2, abs=0.2)
        assert rep6.premium_bps == pytest.approx(-1.3, abs=0.2)

    def test_zero_impact_equals_flat_cost_premium(self):
        rep = premium(zero_impact(), CFG)
        assert rep.premium == pytest.approx(6000.0, rel=1e-8)
        assert rep.naive_premium == pytest.approx(rep.premium, rel=1e-12)

    def test_optimal_never_worse_than_tracking(self):
        for params in (baseline(), zero_impact(),
                       baseline(volume=two_bucket_volume())):
            rep = premium(params, CFG)
            assert rep.premium <= rep.naive_premium + 1e-9
            if not params.impact.is_zero:
                assert rep.premium < rep.naive_premium - 1.0

    def test_risk_aversion_monotonicity(self):
        rep3 = premium(baseline(gamma=3e-6), CFG)
        rep6 = premium(baseline(gamma=6e-6), CFG)
        assert rep3.premium <= rep6.premium <= rep3.naive_premium

    def test_bps_consistent(self):
        rep = premium(baseline(), CFG)
        assert rep.premium_bps == pytest.approx(1e4 * rep.premium / NOTIONAL, rel=1e-15)

    def test_relative_flag_fills_lambda(self):
        rep = premium(zero_impact(gamma=0.0), CFG, relative=True)
        assert rep.lambda_star is not None
        assert rep.lambda_star_bps == pytest.approx(1e4 * rep.lambda_star, rel=1e-15)

    def test_premium_is_negated_certainty_equivalent(self):
        # The charged premium equals minus the certainty equivalent of the
        # optimal schedule's Gaussian slippage: -(mean - gamma/2 * variance).
        for params in (baseline(gamma=3e-6), baseline(gamma=6e-6)):
            rep = premium(params, CFG)
            ce = rep.slippage_mean - 0.5 * params.gamma * rep.slippage_std ** 2
            assert rep.premium == pytest.approx(-ce, rel=1e-10)

    def test_propagates_solver_failure(self):
        from vwapguard import NonConvergenceError
        from conftest import nonlinear_impact
        with pytest.raises(NonConvergenceError):
            premium(nonlinear_impact(), SolverConfig(J=2000, max_iter=1))


class TestOwnVolumeBenchmark:
    def test_factor(self):
        assert own_volume_factor(baseline()) == pytest.approx(10.0 / 11.0, rel=1e-15)

    def test_factor_limit_small_order(self):
        params = dataclasses.replace(baseline(), q0=1e-3)
        assert own_volume_factor(params) == pytest.approx(1.0, abs=1e-9)

    def test_adjusted_params(self):
        params = baseline()
        adj = adjust_for_own_volume(params)
        c = 10.0 / 11.0
        assert adj.sigma == pytest.approx(c * SIGMA, rel=1e-15)
        assert adj.impact.k == pytest.approx(c * 5e-7, rel=1e-15)
        assert adj.cost == params.cost and adj.q0 == params.q0

    def test_moments_match_direct_expression(self):
        # Independent transcription of the own-volume slippage law: the
        # impact terms and the noise carry the factor Q_T/(Q_T + q0).
        params = baseline()
        adj = adjust_for_own_volume(params)
        c = own_volume_factor(params)
        t = params.grid_times(400)
        dt = np.diff(t)
        vstep = params.volume.interval_rates(t)
        qcum = np.concatenate([[0.0], np.cumsum(vstep * dt)])
        qtot = qcum[-1]
        for q in admissible_random_curves(params, t, 100, seed=31):
            curve = TradingCurve(t, q)
            mean, var = slippage_moments(adj, curve)
            rates = np.diff(q) / dt
            lcost = np.sum(dt * vstep * params.cost.cost(rates / vstep))
            rebate = np.sum(dt * (vstep / qtot)
                            * params.impact.impact_integral(Q0 - q[1:]))
            direct_mean = -c * params.impact.double_integral(Q0) - lcost + c * Q0 * rebate
            dev = q[1:] / Q0 - (1.0 - qcum[1:] / qtot)
            direct_var = (c * SIGMA * Q0) ** 2 * np.sum(dt * dev ** 2)
            assert mean == pytest.approx(direct_mean, rel=1e-10)
            assert var == pytest.approx(direct_var, rel=1e-10)


class TestRelativePremium:
    def test_affine_case_exact(self):
        params = zero_impact(gamma=0.0)
        search = relative_premium(params, CFG)
        expected = 6000.0 / NOTIONAL
        assert search.lambda_star == pytest.approx(expected, rel=1e-9)

    def test_matches_absolute_pricing_in_bps(self):
        params = baseline()
        search = relative_premium(params, CFG)
        rep = premium(params, CFG)
        assert abs(1e4 * search.lambda_star - rep.premium_bps) <= 0.5

    def test_breakeven_brackets_root(self):
        params = baseline()
        lam = relative_premium(params, CFG).lambda_star
        assert breakeven_gap(params, CFG, lam - 1e-4) <= 0.0
        assert breakeven_gap(params, CFG, lam + 1e-4) >= 0.0

    def test_samples_recorded(self):
        search = relative_premium(zero_impact(gamma=0.0), CFG)
        assert len(search.samples) >= 20
        lams = [s[0] for s in search.samples[:20]]
        assert lams == sorted(lams)

    def test_no_sign_change_reported(self):
        params = baseline()
        with pytest.raises(NoSignChangeError) as exc_info:
            relative_premium(params, CFG, lo=0.5, hi=0.9, n_scan=5)
        assert len(exc_info.value.samples) == 5

    def test_large_price_shrinks_lambda(self):
        big_s0 = dataclasses.replace(zero_impact(gamma=0.0), S0=5e4)
        lam = relative_premium(big_s0, CFG).lambda_star
        assert 0.0 < lam == pytest.approx(6000.0 / (Q0 * 5e4), rel=1e-9)
