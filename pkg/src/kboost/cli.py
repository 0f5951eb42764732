"""Command-line interface: ``kboost {fit,predict,cv,simulate,eigen,bench}``.

Exit status is 0 on success, 2 on a usage error and 1 on a runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateScaleError, DesignError, OutsideSupportError, SpectrumError
from .experiments import (
    RealDataConfig,
    SimulationModel,
    StudyConfig,
    default_jobs,
    parse_method,
    pilot_scale,
    run_benchmark,
    run_lowrank_study,
    run_real_data,
    run_robust_study,
    simulate,
)
from .io import fmt, load_dataset, read_column, write_csv, write_dataset, write_report
from .kernels import KernelKind
from .robust import HUBER_FACTOR, RobustSpec, huber_constant
from .smoothers import SmootherKind
from .spectral import eigendecompose, nonsymmetric_spectrum
from .tuning import MethodConfig, boosted_fit, fit_learner, kfold_cv

__all__ = ["RunConfig", "build_parser", "parse_args", "main"]

PILOT_NOTE = (
    "With --huber-c auto the cutoff is factor * sigma, where sigma is a robust "
    "scale (Qn or MAD) of the residuals of an internal pilot fit: local-constant "
    "projection boosting with 10 steps and a cross-validated bandwidth. This "
    "pilot replaces an external GAM fit."
)


# ---------------------------------------------------------------- arg types


def _number(kind, test, what):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid number: {text!r}") from None
        if isinstance(v, float) and not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
        if not test(v):
            raise argparse.ArgumentTypeError(f"must be {what}, got {text!r}")
        return v

    return parse


positive = _number(float, lambda v: v > 0, "positive")
nonneg = _number(float, lambda v: v >= 0, "nonnegative")
nonneg_int = _number(int, lambda v: v >= 0, "a nonnegative integer")
pos_int = _number(int, lambda v: v >= 1, "a positive integer")
grid_int = _number(int, lambda v: v >= 2, "an integer >= 2")
fold_int = grid_int


def _pair(text, conv=float):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    try:
        return conv(parts[0]), conv(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a valid pair: {text!r}") from None


def support_arg(text):
    lo, hi = _pair(text)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise argparse.ArgumentTypeError(f"need finite lo < hi, got {text!r}")
    return lo, hi


def cols_arg(text):
    x, y = _pair(text, str)
    if not x or not y:
        raise argparse.ArgumentTypeError(f"expected xcol:ycol, got {text!r}")
    return x, y


def grid_arg(text):
    """``lo:hi:count``, linearly spaced."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a valid grid: {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi or lo < 0:
        raise argparse.ArgumentTypeError(f"need 0 <= lo <= hi, got {text!r}")
    if count < 1:
        raise argparse.ArgumentTypeError(f"count must be positive, got {text!r}")
    return np.linspace(lo, hi, count)


def rank_arg(text):
    if text == "full":
        return None
    return pos_int(text)


def huber_c_arg(text):
    return "auto" if text == "auto" else positive(text)


def _list(conv):
    def parse(text):
        return tuple(conv(t) for t in text.split(",") if t.strip())

    return parse


def method_arg(text):
    try:
        return parse_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _choice_parser(enum_cls):
    def parse(text):
        try:
            return enum_cls.parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


# ---------------------------------------------------------------- parser


def _data_flags(p, required=True):
    p.add_argument("--data", required=required, type=Path, help="CSV with header (default columns x,y)")
    p.add_argument("--cols", type=cols_arg, help="column mapping xcol:ycol, e.g. age:logwage")
    p.add_argument("--support", type=support_arg, help="covariate support lo:hi (default: data range)")


def _smoother_flags(p):
    p.add_argument("--smoother", required=True, type=_choice_parser(SmootherKind), help="lc, ll, nw or spline")
    p.add_argument("--kernel", default=KernelKind.EPANECHNIKOV, type=_choice_parser(KernelKind), help="epanechnikov (default), gaussian, ...")
    p.add_argument("--grid", default=200, type=grid_int, help="quadrature grid size G (default 200)")
    p.add_argument("--rank", default=None, type=rank_arg, help="low-rank truncation d, or 'full' (default)")


def _robust_flags(p):
    g = p.add_argument_group("robust boosting", PILOT_NOTE)
    g.add_argument("--robust", action="store_true", help="Huber pseudo-data boosting")
    g.add_argument("--huber-c", default="auto", type=huber_c_arg, help="cutoff value or 'auto' (default)")
    g.add_argument("--huber-factor", default=HUBER_FACTOR, type=positive, help="factor for auto cutoff (default 1.345)")
    g.add_argument("--psi-tol", default=1e-6, type=positive, help="pseudo-data tolerance (default 1e-6)")
    g.add_argument("--psi-max-iter", default=100, type=pos_int, help="pseudo-data iteration cap (default 100)")
    g.add_argument("--scale", default="qn", choices=("qn", "mad"), help="robust scale for auto cutoff")
    g.add_argument("--pilot-grid", type=grid_arg, help="bandwidth grid lo:hi:count for the pilot fit")


def _param_flags(p):
    p.add_argument("--bandwidth", type=positive, help="bandwidth h > 0 (kernel smoothers)")
    p.add_argument("--lambda", dest="lam", type=nonneg, help="penalty lambda >= 0 (spline)")
    p.add_argument("--iters", default=0, type=nonneg_int, help="boosting steps b (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kboost", description="Kernel-smoother L2 and robust boosting.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("fit", help="boosted fit at the data points", epilog=PILOT_NOTE)
    _data_flags(p)
    _smoother_flags(p)
    _param_flags(p)
    _robust_flags(p)
    p.add_argument("--out", type=Path, help="output CSV x,y,fit (default stdout)")
    p.add_argument("--matrix-out", type=Path, help="also write the smoother matrix as CSV")
    p.add_argument("--seed", type=nonneg_int, default=0, help="seed for the pilot CV folds")

    p = sub.add_parser("predict", help="boosted prediction at new points", epilog=PILOT_NOTE)
    _data_flags(p)
    _smoother_flags(p)
    _param_flags(p)
    _robust_flags(p)
    p.add_argument("--at", required=True, type=Path, help="CSV with an x column of new points")
    p.add_argument("--out", type=Path, help="output CSV x,prediction (default stdout)")
    p.add_argument("--seed", type=nonneg_int, default=0, help="seed for the pilot CV folds")

    p = sub.add_parser("cv", help="k-fold cross-validation over (parameter, b)", epilog=PILOT_NOTE)
    _data_flags(p)
    _smoother_flags(p)
    _robust_flags(p)
    p.add_argument("--param-grid", required=True, type=grid_arg, help="lo:hi:count, linearly spaced h or lambda values")
    p.add_argument("--b-max", default=1000, type=nonneg_int, help="largest boosting step (default 1000)")
    p.add_argument("--folds", default=5, type=fold_int, help="number of folds k (default 5)")
    p.add_argument("--seed", type=nonneg_int, default=0, help="fold assignment seed")
    p.add_argument("--out", type=Path, help="output CSV param,b,loss (default stdout)")

    p = sub.add_parser("simulate", help="draw a simulated dataset")
    p.add_argument("--model", default="m1", choices=("m1", "m2"))
    p.add_argument("--errors", default="normal", choices=("normal", "t3"))
    p.add_argument("--n", required=True, type=grid_int, help="sample size (>= 2)")
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--out", type=Path, help="output CSV x,y,truth (default stdout)")

    p = sub.add_parser("eigen", help="smoother spectrum")
    _data_flags(p)
    _smoother_flags(p)
    p.add_argument("--bandwidth", type=positive, help="bandwidth h > 0")
    p.add_argument("--lambda", dest="lam", type=nonneg, help="penalty lambda >= 0 (spline)")
    p.add_argument("--out", type=Path, help="output CSV k,lambda or k,re,im (default stdout)")

    p = sub.add_parser("bench", help="Monte-Carlo studies and the real-data table", epilog=PILOT_NOTE)
    p.add_argument("--study", required=True, choices=("tables", "lowrank", "robust", "real"))
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--paper-scale", action="store_true", help="grids of 40, B_max 5000, 10 repeats")
    p.add_argument("--model", default="m1", choices=("m1", "m2"))
    p.add_argument("--n-list", type=_list(grid_int), help="comma-separated sample sizes")
    p.add_argument("--methods", type=_list(method_arg), help="comma-separated methods, e.g. lc-ep,nw-ga,spline")
    p.add_argument("--ranks", type=_list(pos_int), help="ranks for the low-rank study (default 2,5,10,15)")
    p.add_argument("--c-list", type=_list(positive), help="absolute Huber cutoffs for the robust study (default 1,2)")
    p.add_argument("--replicates", type=pos_int, help="evaluation datasets per repeat (default 100)")
    p.add_argument("--repeats", type=pos_int, help="tuning repeats (default 3, 10 with --paper-scale)")
    p.add_argument("--grid-count", type=pos_int, help="length of the h and lambda grids")
    p.add_argument("--b-max", type=nonneg_int, help="largest boosting step searched")
    p.add_argument("--folds", type=fold_int, help="CV folds (default 5)")
    p.add_argument("--grid", type=grid_int, help="quadrature grid size G (default 200)")
    g = p.add_argument_group("real data (--study real)")
    _data_flags(g, required=False)
    g.add_argument("--kernel", default=KernelKind.EPANECHNIKOV, type=_choice_parser(KernelKind))
    g.add_argument("--c-factors", type=_list(positive), help="cutoff factors times sigma (default 1.345,1,1.6)")
    g.add_argument("--scale", default="qn", choices=("qn", "mad"))
    for p in sub.choices.values():
        p.add_argument("--jobs", type=pos_int, default=None, help="worker processes (default: $KBOOST_JOBS or 1)")
    return parser


@dataclass
class RunConfig:
    """A parsed, validated command line."""

    command: str
    options: dict = field(default_factory=dict)
    jobs: int = 1
    seed: int = 0

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None


def _check(parser, ns):
    cmd = ns.command
    if cmd in ("fit", "predict", "eigen"):
        spline = ns.smoother is SmootherKind.CUBIC_SPLINE
        if spline and ns.lam is None:
            parser.error("--lambda is required for --smoother spline")
        if not spline and ns.bandwidth is None:
            parser.error(f"--bandwidth is required for --smoother {ns.smoother.value}")
    if cmd in ("fit", "predict", "cv"):
        if ns.rank is not None and ns.robust:
            parser.error("--rank cannot be combined with --robust")
        if ns.rank is not None and ns.smoother is SmootherKind.NADARAYA_WATSON:
            parser.error("--rank needs a symmetric smoother (lc, ll or spline)")
    if cmd == "bench" and ns.study == "real" and ns.data is None:
        parser.error("--data is required for --study real")


def parse_args(argv=None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    _check(parser, ns)
    opts = vars(ns).copy()
    command = opts.pop("command")
    jobs = opts.pop("jobs") or default_jobs()
    return RunConfig(command, opts, jobs, opts.get("seed", 0))


# ---------------------------------------------------------------- commands


def _dataset(cfg):
    return load_dataset(cfg.data, cfg.cols, cfg.support)


def _robust_spec(cfg, data) -> Optional[RobustSpec]:
    if not cfg.robust:
        return None
    c = cfg.huber_c
    if c == "auto":
        rc = RealDataConfig(kernel=cfg.kernel, grid_size=cfg.grid, scale=cfg.scale, seed=cfg.seed)
        grid = cfg.pilot_grid if cfg.pilot_grid is not None else np.linspace(0.05 * data.width, 0.5 * data.width, 15)
        sigma, _ = pilot_scale(data, rc, grid)
        c = huber_constant(sigma, cfg.huber_factor)
        print(f"pilot scale {fmt(sigma)}, Huber cutoff {fmt(c)}", file=sys.stderr)
    return RobustSpec(c, cfg.psi_tol, cfg.psi_max_iter)


def _method(cfg, data) -> MethodConfig:
    return MethodConfig(cfg.smoother, cfg.kernel, cfg.grid, _robust_spec(cfg, data), cfg.rank)


def _param(cfg):
    return cfg.lam if cfg.smoother is SmootherKind.CUBIC_SPLINE else cfg.bandwidth


def _emit(path, header, rows):
    if path is None:
        sys.stdout.write(",".join(header) + "\n")
        for r in rows:
            sys.stdout.write(",".join(fmt(v) for v in r) + "\n")
    else:
        write_csv(path, header, rows)


def cmd_fit(cfg):
    data = _dataset(cfg)
    method = _method(cfg, data)
    fit = boosted_fit(data, method, _param(cfg), cfg.iters)
    _emit(cfg.out, ["x", "y", "fit"], zip(data.x, data.y, fit))
    if cfg.matrix_out is not None:
        S, _ = fit_learner(data, replace(method, robust=None, rank=None), _param(cfg))
        write_csv(cfg.matrix_out, [f"c{j}" for j in range(S.n)], S.weights)


def cmd_predict(cfg):
    data = _dataset(cfg)
    x_new = read_column(cfg.at, "x")
    pred = boosted_fit(data, _method(cfg, data), _param(cfg), cfg.iters, x_test=x_new)
    _emit(cfg.out, ["x", "prediction"], zip(x_new, pred))


def cmd_cv(cfg):
    data = _dataset(cfg)
    method = _method(cfg, data)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = kfold_cv(data, method, cfg.param_grid, cfg.b_max, cfg.folds, cfg.seed)
    _emit(cfg.out, ["param", "b", "loss"], res.grid)
    print(f"best param={fmt(res.best_param)} b={res.best_b} loss={fmt(res.best_loss)}")


def cmd_simulate(cfg):
    model = SimulationModel(cfg.model, cfg.errors)
    data, truth = simulate(model, cfg.n, cfg.seed)
    if cfg.out is None:
        _emit(None, ["x", "y", "truth"], zip(data.x, data.y, truth))
    else:
        write_dataset(cfg.out, data, truth=truth)


def cmd_eigen(cfg):
    data = _dataset(cfg)
    method = MethodConfig(cfg.smoother, cfg.kernel, cfg.grid)
    S, _ = fit_learner(data, method, _param(cfg))
    if S.symmetric:
        lam = eigendecompose(S).eigenvalues
        _emit(cfg.out, ["k", "lambda"], zip(range(1, lam.size + 1), lam))
    else:
        ev = nonsymmetric_spectrum(S)
        _emit(cfg.out, ["k", "re", "im"], zip(range(1, ev.size + 1), ev.real, ev.imag))


def cmd_bench(cfg):
    overrides = {}
    for key in ("grid_count", "b_max", "folds", "replicates", "repeats"):
        if cfg.options.get(key) is not None:
            overrides[key] = cfg.options[key]
    if cfg.grid is not None:
        overrides["grid_size"] = cfg.grid

    if cfg.study == "real":
        data = _dataset(cfg)
        rc = RealDataConfig(kernel=cfg.kernel, seed=cfg.seed, scale=cfg.scale)
        if cfg.paper_scale:
            rc = replace(rc, grid_count=40)
        rc = replace(rc, **{k: v for k, v in overrides.items() if k in ("grid_count", "b_max", "folds", "grid_size")})
        if cfg.c_factors:
            rc = replace(rc, c_factors=cfg.c_factors)
        report = run_real_data(data, rc)
    else:
        sc = StudyConfig.paper_scale() if cfg.paper_scale else StudyConfig()
        sc = replace(sc, **overrides)
        model = SimulationModel(cfg.model, "t3" if cfg.study == "robust" else "normal")
        n_list = cfg.n_list or (100, 200, 500)
        if cfg.study == "tables":
            methods = cfg.methods or tuple(
                parse_method(m) for m in ("lc-ep", "ll-ep", "nw-ep", "spline", "lc-ga", "ll-ga", "nw-ga")
            )
            report = run_benchmark(model, methods, n_list, sc.replicates, sc.repeats, cfg.seed, sc, cfg.jobs)
        elif cfg.study == "lowrank":
            report = run_lowrank_study(model, n_list, cfg.ranks or (2, 5, 10, 15), cfg.seed, sc, cfg.jobs)
        else:
            methods = cfg.methods or tuple(parse_method(m) for m in ("lc-ep", "ll-ep", "nw-ep", "spline"))
            report = run_robust_study(model, methods, n_list, cfg.c_list or (1.0, 2.0), cfg.seed, sc, cfg.jobs)
    for path in write_report(report, cfg.out_dir):
        print(path)


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "simulate": cmd_simulate,
    "eigen": cmd_eigen,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[cfg.command](cfg)
    except (OSError, ValueError, DesignError, OutsideSupportError, SpectrumError, DegenerateScaleError) as exc:
        print(f"kboost {cfg.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
