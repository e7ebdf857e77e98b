"""Command-line entry point.

Subcommands: bounds, simulate, coupling-check, stats, volatility.  Every
command echoes its effective configuration (defaulted seed included) as a
JSON line on stderr; reruns with the same flags produce byte-identical
outputs.  Exit codes: 0 success, 2 input/validation, 3 numerical
nonconvergence, 4 statistical check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds as bounds_mod
from . import signal as signal_mod
from . import volatility as vol_mod
from .chain import Distribution, PolynomialKernel, load_model, validate_kernel
from .coupling import lemma_check
from .errors import (
    KernelInvalidError,
    ModelSpecError,
    NmcError,
    NonconvergenceError,
    PriceDataError,
)
from .experiments import ComparisonTable, builtin_example, compare_bounds, export_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGENCE = 3
EXIT_STATISTICAL = 4


def _echo_config(command: str, args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["command"] = command
    print(json.dumps(cfg, sort_keys=True, default=str), file=sys.stderr)


def _resolve_kernel(args) -> PolynomialKernel:
    if args.model is not None:
        kernel = load_model(args.model)
    else:
        kernel = builtin_example(args.example, args.kappa)
    check = validate_kernel(kernel, grid=200)
    if not check.ok:
        raise KernelInvalidError(
            f"model fails validation: worst entry {check.worst_negative_entry:.3e}, "
            f"row-sum deviation {check.worst_row_sum_dev:.3e}")
    return kernel


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="model-spec JSON file")
    group.add_argument("--example", type=int, choices=(1, 2), help="built-in example id")
    parser.add_argument("--kappa", type=float, default=0.1,
                        help="nonlinearity strength for built-in examples")


def cmd_bounds(args) -> int:
    kernel = _resolve_kernel(args)
    report = bounds_mod.full_report(kernel, args.steps, seed=args.seed)
    names, rows = report.curve_table()
    report.to_csv(f"{args.out_prefix}_bounds.csv")
    report.to_json(f"{args.out_prefix}_coefficients.json")
    show = min(4, args.steps)
    print("bound curves, n = 1..%d" % show)
    print("  ".join(f"{c:>18}" for c in names))
    for row in rows[:show]:
        print("  ".join(f"{v:>18.6g}" for v in row))
    return EXIT_OK


def cmd_simulate(args) -> int:
    kernel = _resolve_kernel(args)
    table, _ = compare_bounds(kernel, args.steps, rng=None, trials=args.trials,
                              seed=args.seed)
    export_report(table, args.out)
    print(f"wrote {args.out} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_coupling_check(args) -> int:
    kernel = _resolve_kernel(args)
    P = kernel.linear_part
    mu0 = Distribution.point(P.p, 0)
    nu0 = Distribution.uniform(P.p)
    underpowered = args.samples < 1000
    if underpowered:
        print("warning: underpowered run (samples < 1000); thresholds not enforced",
              file=sys.stderr)
    report = lemma_check(P, mu0, nu0, args.steps, args.samples,
                         np.random.default_rng(args.seed),
                         allow_underpowered=True)
    table = ComparisonTable(
        ["t", "tv1", "tv2", "q_exact", "q_empirical"], list(report.rows()))
    export_report(table, args.out)
    status = "pass" if report.passed else "fail"
    print(f"coupling check: {status} (max tv {max(report.tv1.max(), report.tv2.max()):.4f}, "
          f"max |q_emp - q_exact| {np.abs(report.q_empirical - report.q_exact).max():.4f})")
    if underpowered:
        return EXIT_OK
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def _stats_rows(label: str, series) -> list:
    st = signal_mod.descriptive_stats(series)
    if st.degenerate:
        # constant series: tests are undefined, row carries the flags
        return [label, st.mean, st.std, math.nan, math.nan,
                math.nan, "degenerate", math.nan, "degenerate"]
    ks = signal_mod.ks_test(series)
    lb = signal_mod.ljung_box(series)
    return [label, st.mean, st.std, st.skewness, st.excess_kurtosis,
            ks.statistic, ks.stars, lb.q_stat, lb.stars]


def cmd_stats(args) -> int:
    prices = signal_mod.load_prices(args.prices, args.date_col, args.price_col)
    spec = signal_mod.WaveletSpec()
    den = signal_mod.denoise(prices, spec)
    raw_returns = signal_mod.log_returns(prices)
    den_returns = signal_mod.log_returns(den.denoised)
    columns = ["type", "mean", "std", "skewness", "kurtosis",
               "ks_stat", "ks_stars", "lb_q", "lb_stars"]
    rows = [
        _stats_rows("X", raw_returns),
        _stats_rows("X*", den_returns),
        _stats_rows("noise", den.noise),
    ]
    table = ComparisonTable(columns, rows)
    export_report(table, args.out)
    print(f"wrote {args.out}")
    for row in rows:
        print("  ".join(str(v) if isinstance(v, str) else format(float(v), ".6g")
                        for v in row))
    return EXIT_OK


def _volatility_config(args) -> vol_mod.VolatilityConfig:
    lengths = tuple(range(args.window_min, args.window_max + 1, args.window_step))
    return vol_mod.VolatilityConfig(
        window_lengths=lengths, reps=args.reps, n_states=args.states,
        epochs=args.epochs, seed=args.seed, date_stride=args.date_stride)


def cmd_volatility(args) -> int:
    cfg = _volatility_config(args)
    if args.self_check:
        prices = vol_mod.two_regime_prices(args.seed)
        boundary = 400
        # the self-check isolates the indicator from the denoiser: it
        # verifies the structural response to a variance break on the raw
        # fixture returns
        returns = signal_mod.log_returns(prices)
    else:
        prices = signal_mod.load_prices(args.prices, args.date_col, args.price_col)
        boundary = None
        den = signal_mod.denoise(prices, signal_mod.WaveletSpec())
        returns = signal_mod.log_returns(den.denoised)
    tv = vol_mod.tv_volatility(returns, cfg)
    garch = vol_mod.fit_garch11(returns)
    sigma = vol_mod.garch_conditional_vol(garch.model, returns)
    table = vol_mod.comparison_table(returns, tv, sigma)
    export_report(table, f"{args.out_prefix}_comparison.csv")
    garch_table = ComparisonTable(
        ["name", "coef", "std_err", "t"],
        [[name, coef, se, t] for name, coef, se, t in garch.table_rows()])
    export_report(garch_table, f"{args.out_prefix}_garch.csv")
    print(json.dumps({"window_lengths": list(cfg.window_lengths),
                      "reps": cfg.reps, "n_states": cfg.n_states,
                      "epochs": cfg.epochs, "evaluated_dates": len(tv.dates)}))
    print("GARCH(1,1) fit:")
    for name, coef, se, t in garch.table_rows():
        print(f"  {name:>7}: coef {coef: .4e}  std err {se: .4e}  t {t: .2f}")
    if garch.boundary_flag:
        print("  note: persistence near the unit boundary", file=sys.stderr)
    if args.self_check:
        check = vol_mod.variance_break_check(tv, returns, boundary - 1)
        print(f"self-check: baseline {check.mean_low:.4f} break plateau "
              f"{check.mean_plateau:.4f} tail {check.mean_tail:.4f} -> "
              f"{'pass' if check.elevated_at_break else 'fail'}")
        return EXIT_OK if check.elevated_at_break else EXIT_STATISTICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmcbounds",
        description="Convergence bounds for finite-state nonlinear Markov chains "
                    "and the TV-volatility indicator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="coefficients and bound curves for one model")
    _add_model_flags(p)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", default="bounds")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="true-TV envelope vs bound curves")
    _add_model_flags(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--steps", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="simulate.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coupling-check", help="statistical validation of the coupling")
    _add_model_flags(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="coupling_check.csv")
    p.set_defaults(func=cmd_coupling_check)

    p = sub.add_parser("stats", help="descriptive statistics of raw/denoised returns")
    p.add_argument("--prices", required=True)
    p.add_argument("--date-col", default="date")
    p.add_argument("--price-col", default="adj_close")
    p.add_argument("--out", default="stats.csv")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("volatility", help="TV-volatility pipeline plus GARCH baseline")
    p.add_argument("--prices")
    p.add_argument("--date-col", default="date")
    p.add_argument("--price-col", default="adj_close")
    p.add_argument("--window-min", type=int, default=60)
    p.add_argument("--window-max", type=int, default=80)
    p.add_argument("--window-step", type=int, default=5)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--date-stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", default="volatility")
    p.add_argument("--self-check", action="store_true",
                   help="run on the built-in two-regime fixture and verify the "
                        "regime elevation property")
    p.set_defaults(func=cmd_volatility)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "volatility" and not args.self_check and not args.prices:
        parser.error("volatility requires --prices (or --self-check)")
    _echo_config(args.command, args)
    try:
        return args.func(args)
    except (ModelSpecError, PriceDataError, KernelInvalidError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonconvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
