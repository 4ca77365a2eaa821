"""Command-line surface.

Five workflows: critical values, fitting, sequential monitoring,
retrospective testing, and the experiment harness.  Exit codes: 0 success,
1 statistical failure modes flagged in the report (e.g. fit non-convergence,
excessive replication failures), 2 usage/IO errors.  Every randomized command
requires an explicit seed.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from dpdmon.core import ConstantBoundary, NormKind
from dpdmon.critval import critical_value_retro, critical_value_sequential
from dpdmon.exceptions import ConfigurationError, DPDError, OptimizationError
from dpdmon.garch import mdpde_fit_garch
from dpdmon.monitor import run_monitor
from dpdmon.normal import mdpde_fit_normal
from dpdmon.retro import retro_test
from dpdmon.simlab import parse_scenario_config, run_scenario


class UsageError(Exception):
    """Bad arguments, unreadable/malformed input files, invalid configs."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def read_series(path, log_returns: bool = False, scale: bool = True) -> np.ndarray:
    """Load a series file: one value per row, or ``timestamp,value`` rows.

    With ``log_returns`` the values are treated as prices and transformed to
    r_t = 100 (log P_t - log P_{t-1}) (drop ``scale`` to omit the 100).
    """
    values = []
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) == 1:
                token = parts[0]
            elif len(parts) == 2:
                token = parts[1]
            else:
                raise UsageError(f"{path}:{lineno}: expected 'value' or 'timestamp,value'")
            try:
                v = float(token)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: malformed value {token!r}") from None
            if not math.isfinite(v):
                raise UsageError(f"{path}:{lineno}: non-finite value {token!r}")
            values.append(v)
    if not values:
        raise UsageError(f"{path}: no data rows")
    x = np.array(values)
    if log_returns:
        if np.any(x <= 0.0):
            raise UsageError(f"{path}: log-return transform needs strictly positive prices")
        x = np.diff(np.log(x))
        if scale:
            x = 100.0 * x
    return x


def _fit(series, engine, alpha, p, q):
    if engine == "normal":
        return mdpde_fit_normal(series, alpha)
    return mdpde_fit_garch(series, alpha, p=p, q=q)


def _theta_names(fit):
    if fit.engine == "normal":
        return ["mu", "sigma"]
    return ["omega"] + [f"alpha{i + 1}" for i in range(fit.p)] + [
        f"beta{j + 1}" for j in range(fit.q)
    ]


def _print_fit(fit, out):
    print("# dpdmon fit report", file=out)
    print(f"engine = {fit.engine}", file=out)
    print(f"alpha = {_fmt(fit.alpha)}", file=out)
    print(f"n_used = {fit.n_used}", file=out)
    print(f"converged = {'yes' if fit.converged else 'no'}", file=out)
    print(f"objective = {_fmt(fit.objective)}", file=out)
    print(f"grad_norm = {_fmt(fit.grad_norm)}", file=out)
    print(f"theta_names = {','.join(_theta_names(fit))}", file=out)
    print(f"theta = {','.join(_fmt(v) for v in fit.theta)}", file=out)
    for i, row in enumerate(fit.info_hat, start=1):
        print(f"info_row{i} = {','.join(_fmt(v) for v in row)}", file=out)


def cmd_critval(args):
    if args.kind == "sequential":
        b = critical_value_sequential(args.d, args.level)
        print(f"{b:.3f}")
    else:
        if args.seed is None:
            raise UsageError("--seed is required for retro critical values")
        c = critical_value_retro(
            args.d, args.level, grid_n=args.grid_n, n_mc=args.n_mc, seed=args.seed
        )
        print(f"{c:.6g}")
    return 0


def cmd_fit(args):
    series = read_series(args.series, args.log_returns, not args.no_scale)
    try:
        fit = _fit(series, args.engine, args.alpha, args.p, args.q)
    except OptimizationError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        if exc.best is not None:
            _print_fit(exc.best, sys.stdout)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            _print_fit(fit, fh)
    else:
        _print_fit(fit, sys.stdout)
    return 0


def _write_detector_csv(path, outcome):
    with open(path, "w") as fh:
        fh.write("k,detector,boundary,alarm\n")
        for i, d in enumerate(outcome.detector_path, start=1):
            b = outcome.boundary(i / outcome.n)
            alarm = int(outcome.stop_k is not None and i == outcome.stop_k)
            fh.write(f"{i},{_fmt(d)},{_fmt(b)},{alarm}\n")


def cmd_monitor(args):
    hist = read_series(args.hist, args.log_returns, not args.no_scale)
    stream = read_series(args.stream, args.log_returns, not args.no_scale)
    if (args.level is None) == (args.b is None):
        raise UsageError("exactly one of --level or --b must be given")
    try:
        fit = _fit(hist, args.engine, args.alpha, args.p, args.q)
    except OptimizationError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    d = fit.theta.shape[0]
    b = args.b if args.b is not None else critical_value_sequential(d, args.level)
    boundary = ConstantBoundary(b)
    norm = NormKind.MAX if args.norm == "max" else NormKind.EUCLIDEAN
    outcome = run_monitor(fit, hist, stream, boundary, norm=norm, horizon=args.horizon)
    print("# dpdmon monitor report")
    print(f"engine = {args.engine}")
    print(f"alpha = {_fmt(fit.alpha)}")
    print(f"n = {outcome.n}")
    print(f"horizon = {outcome.horizon}")
    print(f"b = {_fmt(b)}")
    print(f"verdict = {'change' if outcome.alarm else 'no-change'}")
    print(f"stop_k = {outcome.stop_k if outcome.alarm else 'none'}")
    print(f"k_consumed = {outcome.detector_path.size}")
    print(f"detector_max = {_fmt(np.max(outcome.detector_path))}")
    if args.path_out:
        _write_detector_csv(args.path_out, outcome)
    return 0


def cmd_retro(args):
    series = read_series(args.series, args.log_returns, not args.no_scale)
    if args.seed is None:
        raise UsageError("--seed is required (retro critical values are simulated)")
    try:
        res = retro_test(
            series,
            args.alpha,
            engine=args.engine,
            p=args.p,
            q=args.q,
            level=args.level,
            critval_seed=args.seed,
            grid_n=args.grid_n,
            n_mc=args.n_mc,
        )
    except OptimizationError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    print("# dpdmon retro report")
    print(f"engine = {args.engine}")
    print(f"alpha = {_fmt(res.alpha)}")
    print(f"n = {res.path.size}")
    print(f"level = {_fmt(res.level)}")
    print(f"statistic = {_fmt(res.statistic)}")
    print(f"critical = {_fmt(res.critical)}")
    print(f"reject = {'yes' if res.reject else 'no'}")
    print(f"change_point = {res.change_point}")
    return 0


def cmd_experiment(args):
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc}") from None
    try:
        sc = parse_scenario_config(text)
        if args.seed is not None:
            from dataclasses import replace

            sc = replace(sc, seed=args.seed)
        if sc.seed is None:
            raise ConfigurationError("config must set a seed (or pass --seed)")
    except ConfigurationError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    report = run_scenario(sc, n_jobs=args.n_jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "rejection_curves.csv", "w") as fh:
        fh.write("k," + ",".join(f"alpha_{a:g}" for a in report.alphas) + "\n")
        curves = [report.rejection_curve(a) for a in report.alphas]
        for k in range(sc.horizon):
            fh.write(f"{k + 1}," + ",".join(_fmt(c[k]) for c in curves) + "\n")

    ratios = report.d_alpha()
    with open(out_dir / "delay_stats.csv", "w") as fh:
        cols = "alpha,n_ok,n_fail,terminal_rate,mean_delay,q25,median,q75"
        fh.write(cols + (",d_alpha\n" if ratios else "\n"))
        for a in report.alphas:
            n_fail = int(np.sum(report.failed[a]))
            base = f"{a:g},{report.n_ok(a)},{n_fail},{_fmt(report.terminal_rate(a))}"
            if sc.k_star is not None:
                st = report.delay_stats(a)
                base += f",{_fmt(st['mean'])},{_fmt(st['q25'])},{_fmt(st['median'])},{_fmt(st['q75'])}"
            else:
                base += ",,,,"
            if ratios:
                base += f",{_fmt(ratios[a])}"
            fh.write(base + "\n")

    with open(out_dir / "report.txt", "w") as fh:
        fh.write("# dpdmon experiment report\n")
        fh.write(f"seed = {sc.seed}\n")
        fh.write(f"boundary_b = {_fmt(report.boundary_b)}\n")
        fh.write(f"flagged = {'yes' if report.flagged else 'no'}\n")
        for a in report.alphas:
            fh.write(f"terminal_rate alpha={a:g} = {_fmt(report.terminal_rate(a))}\n")
        if ratios:
            for a in report.alphas:
                fh.write(f"d_alpha alpha={a:g} = {_fmt(ratios[a])}\n")
    print(f"wrote {out_dir}/rejection_curves.csv, delay_stats.csv, report.txt")
    if report.flagged:
        print("report flagged: fit failures reached 2% of replications", file=sys.stderr)
        return 1
    return 0


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpdmon", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_cv = sub.add_parser("critval", help="sequential or retrospective critical values")
    p_cv.add_argument("--kind", choices=["sequential", "retro"], default="sequential")
    p_cv.add_argument("--d", type=_positive_int, required=True, help="parameter dimension")
    p_cv.add_argument("--level", type=float, required=True)
    p_cv.add_argument("--grid-n", type=int, default=4096)
    p_cv.add_argument("--n-mc", type=int, default=100_000)
    p_cv.add_argument("--seed", type=int, default=None)
    p_cv.set_defaults(func=cmd_critval)

    def series_opts(p):
        p.add_argument("--engine", choices=["normal", "garch"], default="garch")
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--p", type=int, default=1)
        p.add_argument("--q", type=int, default=1)
        p.add_argument("--log-returns", action="store_true", help="treat input as prices")
        p.add_argument("--no-scale", action="store_true", help="omit the x100 in log returns")

    p_fit = sub.add_parser("fit", help="MDPDE fit of a series")
    p_fit.add_argument("--series", required=True)
    series_opts(p_fit)
    p_fit.add_argument("--out", default=None, help="write the report to a file")
    p_fit.set_defaults(func=cmd_fit)

    p_mon = sub.add_parser("monitor", help="sequential monitoring of a stream")
    p_mon.add_argument("--hist", required=True, help="historical series file")
    p_mon.add_argument("--stream", required=True, help="monitoring series file")
    series_opts(p_mon)
    p_mon.add_argument("--level", type=float, default=None)
    p_mon.add_argument("--b", type=float, default=None, help="explicit constant boundary")
    p_mon.add_argument("--horizon", type=_positive_int, required=True)
    p_mon.add_argument("--norm", choices=["max", "euclidean"], default="max")
    p_mon.add_argument("--path-out", default=None, help="detector path CSV")
    p_mon.set_defaults(func=cmd_monitor)

    p_retro = sub.add_parser("retro", help="retrospective change-point test")
    p_retro.add_argument("--series", required=True)
    series_opts(p_retro)
    p_retro.add_argument("--level", type=float, default=0.05)
    p_retro.add_argument("--seed", type=int, default=None)
    p_retro.add_argument("--grid-n", type=int, default=4096)
    p_retro.add_argument("--n-mc", type=int, default=100_000)
    p_retro.set_defaults(func=cmd_retro)

    p_exp = sub.add_parser("experiment", help="run a scenario config")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out-dir", required=True)
    p_exp.add_argument("--n-jobs", type=int, default=1)
    p_exp.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_exp.set_defaults(func=cmd_experiment)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DPDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
