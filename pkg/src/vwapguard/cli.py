"""Command-line front end: config-driven trading-curve export, pricing
reports and Monte Carlo verification.

Usage:    vwapguard curve|price|verify --config <path> [--out <path>]

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import pricing
from . import solver as _solver
from .models import CostSpec, ImpactSpec, MarketParams, VolumeProfile
from .montecarlo import SimulationSpec, simulate_slippage
from .pricing import NoSignChangeError
from .solver import NonConvergenceError, SolverConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "main"]

# Minimum sample size below which the statistical checks cannot produce a
# meaningful standard error and are reported INCONCLUSIVE instead.
_MIN_CONCLUSIVE_PATHS = 2


class ConfigError(Exception):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname


@dataclass
class RunConfig:
    params: MarketParams
    solver: SolverConfig
    sim: SimulationSpec | None
    vwap_prime: bool
    relative: bool
    out: str | None


def _read_sections(path: str) -> dict:
    sections: dict[str, dict[str, str]] = {}
    current = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value, got {line!r}")
        if current is None:
            raise ConfigError("config", f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in sections[current]:
            raise ConfigError(f"{current}.{key}", f"duplicate key at line {lineno}")
        sections[current][key] = value
    return sections


def _take(section: dict, section_name: str, key: str, conv, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{section_name}.{key}", "missing required key")
        return default
    raw = section.pop(key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section_name}.{key}", f"cannot parse {raw!r}: {exc}") from exc


def _as_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean")


def _as_int(raw: str) -> int:
    value = float(raw)
    if value != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _as_float_list(raw: str) -> list[float]:
    return [float(part) for part in raw.split(",") if part.strip()]


def _reject_unknown(section: dict, section_name: str) -> None:
    if section:
        key = next(iter(section))
        raise ConfigError(f"{section_name}.{key}", "unknown key")


def parse_config(path: str) -> RunConfig:
    sections = _read_sections(path)

    def grab(name: str, required=True) -> dict:
        if name not in sections:
            if required:
                raise ConfigError(name, "missing required section")
            return {}
        return sections.pop(name)

    market = grab("market")
    q0 = _take(market, "market", "q0", float)
    horizon = _take(market, "market", "T", float)
    s0 = _take(market, "market", "S0", float)
    sigma = _take(market, "market", "sigma", float)
    gamma = _take(market, "market", "gamma", float)
    _reject_unknown(market, "market")

    cost_sec = grab("cost")
    cost_kind = _take(cost_sec, "cost", "kind", str).lower()
    try:
        if cost_kind == "quadratic":
            cost = CostSpec.quadratic(_take(cost_sec, "cost", "eta", float))
        elif cost_kind == "power":
            cost = CostSpec.power_law(_take(cost_sec, "cost", "eta", float),
                                      _take(cost_sec, "cost", "phi", float))
        elif cost_kind == "power_linear":
            cost = CostSpec.power_law_plus_linear(
                _take(cost_sec, "cost", "eta", float),
                _take(cost_sec, "cost", "phi", float),
                _take(cost_sec, "cost", "psi", float))
        else:
            raise ConfigError("cost.kind", f"unknown kind {cost_kind!r}")
    except ValueError as exc:
        raise ConfigError("cost", str(exc)) from exc
    _reject_unknown(cost_sec, "cost")

    impact_sec = grab("impact")
    impact_kind = _take(impact_sec, "impact", "kind", str).lower()
    try:
        if impact_kind == "zero":
            impact = ImpactSpec.zero()
        elif impact_kind == "linear":
            impact = ImpactSpec.linear(_take(impact_sec, "impact", "k", float))
        elif impact_kind == "power":
            impact = ImpactSpec.power(_take(impact_sec, "impact", "k", float),
                                      _take(impact_sec, "impact", "alpha", float))
        else:
            raise ConfigError("impact.kind", f"unknown kind {impact_kind!r}")
    except ValueError as exc:
        raise ConfigError("impact", str(exc)) from exc
    _reject_unknown(impact_sec, "impact")

    volume_sec = grab("volume")
    volume_kind = _take(volume_sec, "volume", "kind", str).lower()
    try:
        if volume_kind == "flat":
            volume = VolumeProfile.flat(_take(volume_sec, "volume", "V", float), horizon)
        elif volume_kind == "table":
            volume = VolumeProfile.table(
                _take(volume_sec, "volume", "times", _as_float_list),
                _take(volume_sec, "volume", "values", _as_float_list),
                horizon)
        else:
            raise ConfigError("volume.kind", f"unknown kind {volume_kind!r}")
    except ValueError as exc:
        raise ConfigError("volume", str(exc)) from exc
    _reject_unknown(volume_sec, "volume")

    try:
        params = MarketParams(q0=q0, T=horizon, S0=s0, sigma=sigma, gamma=gamma,
                              cost=cost, impact=impact, volume=volume)
    except ValueError as exc:
        raise ConfigError("market", str(exc)) from exc

    solver_sec = grab("solver", required=False)
    try:
        solver_cfg = SolverConfig(
            J=_take(solver_sec, "solver", "J", _as_int, required=False, default=2000),
            tol=_take(solver_sec, "solver", "tol", float, required=False, default=None),
            max_iter=_take(solver_sec, "solver", "max_iter", _as_int,
                           required=False, default=50),
            damping=_take(solver_sec, "solver", "damping", _as_int,
                          required=False, default=20))
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from exc
    _reject_unknown(solver_sec, "solver")

    pricing_sec = grab("pricing", required=False)
    vwap_prime = _take(pricing_sec, "pricing", "vwap_prime", _as_bool,
                       required=False, default=False)
    relative = _take(pricing_sec, "pricing", "relative", _as_bool,
                     required=False, default=False)
    _reject_unknown(pricing_sec, "pricing")

    mc_sec = grab("mc", required=False)
    sim = None
    if mc_sec:
        mode_raw = _take(mc_sec, "mc", "mode", str, required=False, default="formula")
        mode = {"formula": "formula", "formulaslippage": "formula",
                "full": "full", "fullsimulation": "full"}.get(mode_raw.lower())
        if mode is None:
            raise ConfigError("mc.mode", f"unknown mode {mode_raw!r}")
        try:
            sim = SimulationSpec(
                n_paths=_take(mc_sec, "mc", "n_paths", _as_int),
                seed=_take(mc_sec, "mc", "seed", _as_int),
                steps=_take(mc_sec, "mc", "steps", _as_int,
                            required=False, default=solver_cfg.J),
                mode=mode)
        except ValueError as exc:
            raise ConfigError("mc", str(exc)) from exc
    _reject_unknown(mc_sec, "mc")

    output_sec = grab("output", required=False)
    out = _take(output_sec, "output", "out", str, required=False, default=None)
    _reject_unknown(output_sec, "output")

    if sections:
        raise ConfigError(next(iter(sections)), "unknown section")
    return RunConfig(params=params, solver=solver_cfg, sim=sim,
                     vwap_prime=vwap_prime, relative=relative, out=out)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _emit(text: str, out_path: str | None, echo: bool = True) -> None:
    if echo or out_path is None:
        sys.stdout.write(text)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_curve(run: RunConfig, out_path: str | None) -> int:
    params, cfg = run.params, run.solver
    curve, _ = _solver.solve(params, cfg)
    times = curve.times
    vstep = params.volume.interval_rates(times)
    qcum = np.concatenate([[0.0], np.cumsum(vstep * np.diff(times))])
    naive = params.q0 * (1.0 - qcum / qcum[-1])
    lines = ["t,q_star,q_naive,p"]
    for t, qs, qn, p in zip(times, curve.q, naive, curve.p):
        lines.append(f"{_fmt(t)},{_fmt(qs)},{_fmt(qn)},{_fmt(p)}")
    _emit("\n".join(lines) + "\n", out_path, echo=False)
    return 0


def cmd_price(run: RunConfig, out_path: str | None) -> int:
    params, cfg = run.params, run.solver
    report = pricing.premium(params, cfg, relative=run.relative)
    lines = [
        f"premium_currency = {_fmt(report.premium)}",
        f"premium_bps = {_fmt(report.premium_bps)}",
        f"naive_premium_currency = {_fmt(report.naive_premium)}",
        f"naive_premium_bps = {_fmt(report.naive_premium_bps)}",
        f"objective_currency = {_fmt(report.objective_value)}",
        f"slippage_mean_currency = {_fmt(report.slippage_mean)}",
        f"slippage_std_currency = {_fmt(report.slippage_std)}",
        f"solver_iterations = {report.diagnostics.iterations}",
        f"solver_final_residual_shares = {_fmt(report.diagnostics.final_residual)}",
        f"solver_converged = {str(report.diagnostics.converged).lower()}",
        f"solver_oversell_detected = {str(report.diagnostics.oversell_detected).lower()}",
        f"solver_touched_q0 = {str(report.diagnostics.touched_q0).lower()}",
    ]
    if run.relative:
        lines.append(f"lambda_star = {_fmt(report.lambda_star)}")
        lines.append(f"lambda_star_bps = {_fmt(report.lambda_star_bps)}")
    if run.vwap_prime:
        factor = pricing.own_volume_factor(params)
        adjusted = pricing.premium(pricing.adjust_for_own_volume(params), cfg)
        lines.append(f"own_volume_factor = {_fmt(factor)}")
        lines.append(f"adjusted_premium_currency = {_fmt(adjusted.premium)}")
        lines.append(f"adjusted_premium_bps = {_fmt(adjusted.premium_bps)}")
    _emit("\n".join(lines) + "\n", out_path)
    return 0


def _check_line(name: str, status: str, detail: str) -> str:
    return f"check_{name}: {status}  {detail}"


def cmd_verify(run: RunConfig, out_path: str | None) -> int:
    if run.sim is None:
        raise ConfigError("mc", "verify requires an [mc] section")
    params, cfg, spec = run.params, run.solver, run.sim
    curve, _ = _solver.solve(params, cfg)
    mean, variance = pricing.slippage_moments(params, curve)

    formula_spec = SimulationSpec(spec.n_paths, spec.seed, spec.steps, "formula")
    sample = simulate_slippage(params, curve, formula_spec)
    n = spec.n_paths

    lines = [
        f"n_paths = {n}",
        f"analytic_mean_currency = {_fmt(mean)}",
        f"analytic_variance_currency2 = {_fmt(variance)}",
        f"sample_mean_currency = {_fmt(sample.sample_mean)}",
        f"sample_variance_currency2 = {_fmt(sample.sample_var)}",
    ]
    failed = False
    if n < _MIN_CONCLUSIVE_PATHS:
        for name in ("mean", "variance", "skewness", "kurtosis"):
            lines.append(_check_line(name, "INCONCLUSIVE", "standard error too wide"))
    else:
        gap = abs(sample.sample_mean - mean)
        band = 3.0 * sample.standard_error
        ok = gap <= band
        failed |= not ok
        lines.append(_check_line("mean", "PASS" if ok else "FAIL",
                                 f"|gap| = {_fmt(gap)} currency vs 3*SE = {_fmt(band)}"))

        # A riskless schedule has zero analytic variance; the sample variance
        # is then pure round-off, not a chi-squared draw.
        degenerate = variance <= 1e-16 * (abs(mean) + 1.0) ** 2
        if degenerate:
            ok = sample.sample_var <= 1e-16 * (abs(mean) + 1.0) ** 2
            failed |= not ok
            lines.append(_check_line("variance", "PASS" if ok else "FAIL",
                                     f"degenerate law, sample = {_fmt(sample.sample_var)}"))
            lines.append(_check_line("skewness", "INCONCLUSIVE", "degenerate law"))
            lines.append(_check_line("kurtosis", "INCONCLUSIVE", "degenerate law"))
        else:
            lo = variance * stats.chi2.ppf(0.005, n - 1) / (n - 1)
            hi = variance * stats.chi2.ppf(0.995, n - 1) / (n - 1)
            ok = lo <= sample.sample_var <= hi
            failed |= not ok
            lines.append(_check_line("variance", "PASS" if ok else "FAIL",
                                     f"sample = {_fmt(sample.sample_var)} in "
                                     f"[{_fmt(lo)}, {_fmt(hi)}] (chi2 99%)"))

            centered = sample.values - sample.sample_mean
            m2 = float(np.mean(centered ** 2))
            skew = float(np.mean(centered ** 3)) / m2 ** 1.5
            kurt = float(np.mean(centered ** 4)) / m2 ** 2 - 3.0
            for name, value, se in (("skewness", skew, np.sqrt(6.0 / n)),
                                    ("kurtosis", kurt, np.sqrt(24.0 / n))):
                ok = abs(value) <= 4.0 * se
                failed |= not ok
                lines.append(_check_line(name, "PASS" if ok else "FAIL",
                                         f"|{_fmt(value)}| vs 4*SE = {_fmt(4.0 * se)}"))

    if spec.mode == "full":
        full = simulate_slippage(params, curve, spec)
        gap = float(np.mean(np.abs(full.values - sample.values)))
        naive = pricing.premium(params, cfg).naive_premium
        budget = 1e-3 * abs(naive)
        ok = gap <= budget
        failed |= not ok
        lines.append(_check_line("pathwise_identity", "PASS" if ok else "FAIL",
                                 f"mean |full - formula| = {_fmt(gap)} currency "
                                 f"vs {_fmt(budget)}"))

    _emit("\n".join(lines) + "\n", out_path)
    return 4 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vwapguard",
        description="Optimal liquidation curves and premiums for guaranteed-VWAP contracts")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("curve", "write the optimal trading curve as CSV"),
                           ("price", "compute the contract premium report"),
                           ("verify", "Monte Carlo checks of the slippage law")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="also write the output to this file")
    args = parser.parse_args(argv)

    try:
        run = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_path = args.out if args.out is not None else run.out
    try:
        if args.command == "curve":
            return cmd_curve(run, out_path)
        if args.command == "price":
            return cmd_price(run, out_path)
        return cmd_verify(run, out_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if exc.diagnostics is not None:
            d = exc.diagnostics
            print(f"  iterations = {d.iterations}, final_residual_shares = "
                  f"{_fmt(d.final_residual)}", file=sys.stderr)
        return 3
    except NoSignChangeError as exc:
        print(f"pricing error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
