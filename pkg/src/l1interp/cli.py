"""Command-line interface: ``l1interp {solve,lasso,sweep,limits,amp,simulate}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import amp as amp_mod
from . import montecarlo as mc
from . import risk_curve as rc
from .fixed_point import ROOT_TOL, SolverError, solve_interpolator, solve_lasso
from .kernels import KernelError
from .plotting import SvgPlot
from .prior import ModelParams

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
NUMERIC_ERRORS = (SolverError, rc.SingularDerivativeError, mc.BasisPursuitError, mc.LassoError,
                  amp_mod.AmpDivergenceError, FloatingPointError, ArithmeticError) + KernelError


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def grid_log(text: str) -> np.ndarray:
    """``lo:hi:count`` -> ``count`` log-spaced values."""
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}") from None
    if not (0 < lo < hi) or count < 1:
        raise argparse.ArgumentTypeError("need 0 < lo < hi and count >= 1")
    return np.geomspace(lo, hi, count)


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(suppress: bool = False) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they never overwrite values given earlier
    def d(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    g.add_argument("--workers", type=int, default=d(1), help="worker processes (default 1)")
    g.add_argument("--out", default=d(None), help="output file (default: standard output)")
    g.add_argument("--svg", default=d(None), help="also write an SVG plot to this path")
    g.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    g.add_argument("--tol", type=float, default=d(ROOT_TOL), help="root tolerance")
    return p


def _model_args(p: argparse.ArgumentParser, *, required: bool = True, sigma_default=None):
    p.add_argument("--eps", type=float, required=required, help="sparsity level epsilon")
    p.add_argument("--snr", type=float, help="SNR = eps M^2 / sigma^2 (wins over --M)")
    p.add_argument("--M", type=float, help="signal magnitude")
    if sigma_default is None:
        p.add_argument("--sigma", type=float, required=required, help="noise level")
    else:
        p.add_argument("--sigma", type=float, default=sigma_default, help="noise level")


def _model(args, delta: float = 0.5) -> ModelParams:
    if args.eps is None or not 0 < args.eps <= 1:
        raise UsageError("--eps must lie in (0, 1]")
    if args.sigma is None or not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if args.snr is None and args.M is None:
        raise UsageError("one of --snr or --M is required")
    if args.snr is not None and not args.snr > 0:
        raise UsageError("--snr must be positive")
    if args.snr is None and not args.M > 0:
        raise UsageError("--M must be positive")
    return ModelParams.sparse_model(delta, args.eps, M=args.M, snr=args.snr, sigma=args.sigma)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l1interp", parents=[_common()],
        description="Asymptotic risk of minimum l1-norm interpolation and the Lasso.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(suppress=True)

    s = sub.add_parser("solve", parents=[common], help="interpolator fixed point at one delta")
    s.add_argument("--delta", type=float, required=True, help="n/p")
    _model_args(s)
    s.add_argument("--lam", type=float, default=0.0, help="Lasso level (0: interpolator)")

    s = sub.add_parser("lasso", parents=[common], help="Lasso fixed points")
    s.add_argument("--delta", type=float, required=True)
    _model_args(s)
    s.add_argument("--lam", type=float_list, required=True, help="comma-separated levels")

    s = sub.add_parser("sweep", parents=[common], help="risk curve over p/n")
    _model_args(s)
    s.add_argument("--grid-log", type=grid_log, default=None,
                   help="p/n grid lo:hi:count (default 1.01:100:400)")

    s = sub.add_parser("limits", parents=[common], help="closed-form limit values")
    s.add_argument("--delta", type=float, required=True)
    _model_args(s, required=False, sigma_default=1.0)

    s = sub.add_parser("amp", parents=[common], help="run AMP on one random instance")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--p", type=int, default=400)
    _model_args(s)
    s.add_argument("--schedule", choices=("power", "example"), default="power")
    s.add_argument("--lam0", type=float, default=1.0)
    s.add_argument("--power", type=float, default=1.0)
    s.add_argument("--piece-length", type=int, default=5)
    s.add_argument("--lam-stop", type=float, default=1e-2)
    s.add_argument("--inc-tol", type=float, default=5e-2)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--compare-bp", action="store_true",
                   help="report distance to the basis-pursuit solution")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo risk versus theory")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--trials", type=int, default=30)
    _model_args(s)
    s.add_argument("--grid-log", type=grid_log, default=None, help="p/n grid lo:hi:count")
    s.add_argument("--ratios", type=float_list, default=None, help="comma-separated p/n values")
    s.add_argument("--solver", choices=mc.SOLVERS, default="bp-admm")
    s.add_argument("--lam", type=float, default=0.0, help="Lasso level for lasso-cd")
    s.add_argument("--design", choices=mc.DESIGNS, default="gaussian")
    return parser


# ---------------------------------------------------------------------------
# output


def emit(rows: list[dict], args, header=None) -> None:
    if not rows:
        text = ""
    elif args.format == "json":
        text = json.dumps(rows, indent=2, default=_json_default) + "\n"
    else:
        header = header or list(rows[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in header])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v).__name__)


def _json_float(v):
    return None if v is None or not math.isfinite(v) else v


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _references(plot: SvgPlot, params: ModelParams, ratios) -> None:
    """tau0^2 and the minimum-l2 interpolator risk as dotted references."""
    eps, M = params.sparse
    xs = np.asarray(ratios, dtype=float)
    plot.line(xs, [params.sigma**2 + eps * M**2] * len(xs), dash="2,4", color="#7f7f7f",
              label="zero estimator")
    l2 = [rc.l2_interpolator_risk(1.0 / x, eps, M, params.sigma) if x != 1 else math.nan
          for x in xs]
    plot.line(xs, l2, dash="6,3", color="#2ca02c", label="min l2 interpolator")


def _theory_curve(params: ModelParams, ratios) -> tuple[list, list]:
    xs, ys = [], []
    for x in ratios:
        if abs(x - 1.0) < 1e-9:
            continue
        try:
            ys.append(rc.asymptotic_risk(params.with_delta(1.0 / x)))
            xs.append(float(x))
        except SolverError:
            continue
    return xs, ys


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    delta = args.delta
    if not delta > 0:
        raise UsageError("--delta must be positive")
    params = _model(args, delta)
    eps, M = params.sparse
    row = {"delta": delta, "epsilon": eps, "M": M, "sigma": params.sigma,
           "lambda": getattr(args, "lam", 0.0)}
    if delta > 1:
        row.update(branch="ols", tau_sq=rc.ols_limit(delta, params.sigma))
        _note(f"delta > 1: least-squares branch, risk = {row['tau_sq']!r}")
    elif delta == 1:
        raise UsageError("--delta = 1 has infinite risk")
    else:
        if row["lambda"] > 0:
            sol = solve_lasso(row["lambda"], params, tol=args.tol)
        else:
            sol = solve_interpolator(params, tol=args.tol)
        row.update(branch="lasso" if row["lambda"] > 0 else "interpolator",
                   alpha_star=sol.alpha_star, tau_sq=sol.tau_sq, nu_star=sol.nu_star,
                   zeta_star=sol.zeta_star, residual_support=sol.residuals[0],
                   residual_risk=sol.residuals[1])
        _note(f"alpha*={sol.alpha_star!r} tau*^2={sol.tau_sq!r} nu*={sol.nu_star!r} "
              f"residuals={sol.residuals}")
    emit([row], args)
    return EXIT_OK


def cmd_lasso(args) -> int:
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    params = _model(args, args.delta)
    rows = []
    for lam in args.lam:
        if lam < 0:
            raise UsageError("--lam values must be nonnegative")
        sol = solve_lasso(lam, params, tol=args.tol)
        rows.append({"lambda": lam, "alpha_star": sol.alpha_star, "tau_sq": sol.tau_sq,
                     "zeta_star": sol.zeta_star, "residual": sol.residuals[1]})
    emit(rows, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ratios = args.grid_log if args.grid_log is not None else 1.0 / rc.default_grid()[::-1]
    if np.any(ratios <= 1):
        raise UsageError("--grid-log values (p/n) must exceed 1")
    params = _model(args)
    curve = rc.sweep(params, 1.0 / ratios, workers=args.workers)
    for d, err in curve.failures:
        _note(f"skipped delta={d!r}: {err}")
    if not curve.points:
        raise SolverError("every grid point failed")
    rows = [{"delta": p.delta, "inv_delta": p.inv_delta, "tau_sq": p.tau_sq, "alpha": p.alpha,
             "nu": p.nu, "nu_prime": p.nu_prime, "regime": p.regime} for p in curve.points]
    if args.format == "csv":
        text = curve.to_csv()
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        emit(rows, args)
    _note(f"{len(curve.points)} points, {curve.regime_changes()} regime changes")
    if args.svg:
        inv = [p.inv_delta for p in curve.points][::-1]
        plot = SvgPlot(title=f"eps={params.sparse[0]:g}, SNR={params.snr:g}",
                       ylabel="asymptotic risk")
        plot.line(inv, [p.tau_sq for p in curve.points][::-1], label="min l1 interpolator")
        _references(plot, params, inv)
        plot.save(args.svg)
    return EXIT_OK


def cmd_limits(args) -> int:
    d = args.delta
    if not d > 0:
        raise UsageError("--delta must be positive")
    eps = 0.01 if args.eps is None else args.eps
    if args.snr is None and args.M is None:
        args.snr = 2.0
    args.eps = eps
    params = _model(args, d)
    row = {"delta": d, "tau0_sq": params.sigma**2 + eps * params.sparse[1] ** 2}
    if d < 1:
        a0, ratio = rc.eps_to_zero_limits(d)
        row.update(alpha0=a0, H=rc.H_fn(d), eps_limit_nu_over_M=ratio,
                   eps_limit_nu_prime_over_M=rc.eps_to_zero_nu_prime_over_M(d))
    if d != 1:
        row["l2_interpolator_risk"] = rc.l2_interpolator_risk(d, eps, params.sparse[1],
                                                              params.sigma)
    if d > 1:
        row["ols"] = rc.ols_limit(d, params.sigma)
    for k, v in row.items():
        _note(f"{k} = {v!r}")
    emit([row], args)
    return EXIT_OK


def cmd_amp(args) -> int:
    if args.n < 1 or args.p < 1:
        raise UsageError("--n and --p must be positive")
    if args.n >= args.p:
        raise UsageError("--p must exceed --n")
    params = _model(args, args.n / args.p)
    if args.schedule == "example":
        sched = amp_mod.example_schedule()
    else:
        sched = amp_mod.power_schedule(args.lam0, args.power, args.piece_length)
    inst = mc.gen_instance(args.n, args.p, params, args.seed)
    run = amp_mod.run_amp(inst.X, inst.y, params, sched, lam_stop=args.lam_stop,
                          inc_tol=args.inc_tol, max_iter=args.max_iter)
    last = run.trace[-1]
    _note(f"T={run.t} lambda_T={last.lam!r} sg_score={last.sg_score!r} "
          f"increment={last.increment!r}")
    if args.compare_bp:
        bp = mc.min_l1_interpolator(inst)
        dist = float(np.sum((run.theta - bp) ** 2)) / args.p
        ts = solve_interpolator(params).tau_sq
        _note(f"(1/p)||theta_T - theta_BP||^2 = {dist!r} ({dist / ts:.4f} tau*^2)")
    rows = [vars(r) for r in run.trace]
    if args.format == "csv":
        text = run.trace_csv()
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        emit(rows, args)
    if args.svg:
        plot = SvgPlot(title="AMP trace", xlabel="t", ylabel="value")
        ts_ = [r.t for r in run.trace]
        plot.line(ts_, [r.lam for r in run.trace], label="lambda_t")
        plot.line(ts_, [r.sg_score for r in run.trace], label="subgradient score")
        plot.line(ts_, [r.increment for r in run.trace], label="increment")
        plot.save(args.svg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.ratios is not None:
        ratios = np.asarray(args.ratios, dtype=float)
    elif args.grid_log is not None:
        ratios = args.grid_log
    else:
        raise UsageError("one of --grid-log or --ratios is required")
    if np.any(ratios <= 0):
        raise UsageError("p/n values must be positive")
    if args.n < 1 or args.trials < 1:
        raise UsageError("--n and --trials must be positive")
    if args.solver == "lasso-cd" and not args.lam > 0:
        raise UsageError("--lam must be positive with --solver lasso-cd")
    params = _model(args)
    cfg = mc.FigureConfig(tuple(float(r) for r in ratios), n=args.n, trials=args.trials,
                          epsilon=params.sparse[0], snr=None, M=params.sparse[1],
                          sigma=params.sigma, solver=args.solver, lam=args.lam,
                          design=args.design, seed=args.seed, workers=args.workers)
    rows = mc.figure_sweep(cfg)
    for r in rows:
        if r.failures:
            _note(f"p/n={r.p_over_n:g}: {r.failures} failed trials excluded")
    if args.format == "csv":
        text = mc.aggregate_csv(rows)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        emit([{k: (_json_float(v) if isinstance(v, float) else v)
               for k, v in vars(r).items() if k != "records"} for r in rows], args)
    if args.svg:
        plot = SvgPlot(title=f"n={args.n}, eps={cfg.epsilon:g}, SNR={params.snr:g}",
                       ylabel="risk")
        dense = np.geomspace(float(ratios.min()), float(ratios.max()), 200)
        if args.solver != "lasso-cd":
            xs, ys = _theory_curve(params, dense)
            plot.line(xs, ys, label="theory")
        plot.points([r.p_over_n for r in rows], [r.mean_risk for r in rows],
                    [r.stderr_risk for r in rows], label="Monte Carlo")
        _references(plot, params, dense)
        plot.save(args.svg)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "lasso": cmd_lasso, "sweep": cmd_sweep, "limits": cmd_limits,
            "amp": cmd_amp, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.workers < 1:
        _note("error: --workers must be at least 1")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _note(f"usage error: {exc}")
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        _note(f"numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except OSError as exc:
        _note(f"I/O failure: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        _note(f"usage error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
