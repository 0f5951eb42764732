"""Simulation models and the Monte-Carlo study protocols.

Every dataset is drawn from its own Philox stream keyed by
``(seed, n, repeat, slot)`` where slot 0 is the tuning sample and slots
``1..R`` are the evaluation replicates. Methods, ranks and robust/L2 pairs
that share ``(seed, n)`` therefore see identical data, and results do not
depend on how the work is scheduled.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._rng import stream
from .kernels import KernelKind
from .robust import HUBER_FACTOR, RobustSpec, huber_constant, robust_scale
from .smoothers import Dataset, SmootherKind
from .tuning import MethodConfig, boosted_fit, kfold_cv, mse, mse_t

__all__ = [
    "SimulationModel",
    "StudyConfig",
    "BenchmarkCell",
    "BenchmarkReport",
    "simulate",
    "run_benchmark",
    "run_lowrank_study",
    "run_robust_study",
    "RealDataConfig",
    "pilot_scale",
    "fixed_fit_mse",
    "run_real_data",
    "parse_method",
    "default_jobs",
]

NORMAL_VARIANCE = 2.0
T_DF = 3
X_LAW = (-0.5, 0.5)


@dataclass(frozen=True)
class SimulationModel:
    id: str = "m1"
    errors: str = "normal"

    def __post_init__(self):
        object.__setattr__(self, "id", self.id.lower())
        object.__setattr__(self, "errors", self.errors.lower())
        if self.id not in ("m1", "m2"):
            raise ValueError(f"unknown model {self.id!r}; expected m1 or m2")
        if self.errors not in ("normal", "t3"):
            raise ValueError(f"unknown error law {self.errors!r}; expected normal or t3")

    def truth(self, x):
        x = np.asarray(x, dtype=float)
        if self.id == "m1":
            return 0.8 * x + np.sin(6.0 * x)
        return 0.4 * (3.0 * np.sin(4.0 * np.pi * x) + 2.0 * np.sin(3.0 * np.pi * x))

    def noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.errors == "normal":
            return rng.normal(0.0, np.sqrt(NORMAL_VARIANCE), n)
        return rng.standard_t(T_DF, n)

    @property
    def name(self) -> str:
        return f"{self.id}-{self.errors}"


def simulate(model: SimulationModel, n: int, seed: int, *keys: int):
    """Draw ``(Dataset, truth)``: x ~ U(-0.5, 0.5), y = m(x) + noise."""
    n = int(n)
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    rng = stream(seed, *keys)
    x = rng.uniform(X_LAW[0], X_LAW[1], n)
    m = model.truth(x)
    y = m + model.noise(rng, n)
    return Dataset(x, y, X_LAW), m


@dataclass(frozen=True)
class StudyConfig:
    """Grids and Monte-Carlo sizes; the defaults are the desk-scale protocol."""

    h_range: tuple = (0.1, 4.0)
    lam_range: tuple = (0.0, 1000.0)
    grid_count: int = 15
    b_max: int = 500
    folds: int = 5
    replicates: int = 100
    repeats: int = 3
    grid_size: int = 200

    @classmethod
    def paper_scale(cls, **overrides) -> "StudyConfig":
        return cls(grid_count=40, b_max=5000, repeats=10, **overrides)

    def param_grid(self, method: MethodConfig) -> np.ndarray:
        lo, hi = self.lam_range if method.smoother is SmootherKind.CUBIC_SPLINE else self.h_range
        return np.linspace(lo, hi, int(self.grid_count))


@dataclass
class BenchmarkCell:
    method: str
    n: int
    mean: float
    sd: float
    repeat_means: list
    tuned: list  # (param, b) per repeat
    seeds: dict
    extra: dict = field(default_factory=dict)


@dataclass
class BenchmarkReport:
    study: str
    model: str
    cells: list
    metadata: dict = field(default_factory=dict)

    def cell(self, method: str, n: int, **extra) -> BenchmarkCell:
        for c in self.cells:
            if c.method == method and c.n == n and all(c.extra.get(k) == v for k, v in extra.items()):
                return c
        raise KeyError((method, n, extra))


def parse_method(text: str) -> MethodConfig:
    """``lc-ep``, ``ll-ga``, ``nw-epanechnikov``, ``spline`` ..."""
    text = text.strip().lower()
    if text in ("spline", "ss"):
        return MethodConfig(SmootherKind.CUBIC_SPLINE)
    smoother, _, kernel = text.partition("-")
    if not kernel:
        raise ValueError(f"method {text!r} needs a kernel, e.g. {text}-ep")
    aliases = {k.value[:2]: k for k in KernelKind}
    kind = aliases.get(kernel) or KernelKind.parse(kernel)
    return MethodConfig(SmootherKind.parse(smoother), kind)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("KBOOST_JOBS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class _Task:
    model: SimulationModel
    method: MethodConfig
    n: int
    repeat: int
    seed: int
    config: StudyConfig


def _run_task(task: _Task):
    """One repeat: tune on a fresh sample, then average MSE(T) over replicates."""
    cfg = task.config
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tune, _ = simulate(task.model, task.n, task.seed, task.n, task.repeat, 0)
        cv = kfold_cv(
            tune,
            task.method,
            cfg.param_grid(task.method),
            cfg.b_max,
            cfg.folds,
            task.seed,
            stream_keys=(task.n, task.repeat),
        )
        errs = np.empty(cfg.replicates)
        for r in range(cfg.replicates):
            data, truth = simulate(task.model, task.n, task.seed, task.n, task.repeat, r + 1)
            fit = boosted_fit(data, task.method, cv.best_param, cv.best_b)
            errs[r] = mse_t(truth, fit)
    return float(np.mean(errs)), (cv.best_param, cv.best_b)


def _execute(tasks, jobs):
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def _cells(groups, results, seed, config):
    cells = []
    for (label, n, extra), chunk in zip(groups, _chunks(results, config.repeats)):
        means = [r[0] for r in chunk]
        sd = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
        seeds = {"base": int(seed), "n": int(n), "repeats": list(range(config.repeats)), "replicates": config.replicates}
        cells.append(BenchmarkCell(label, int(n), float(np.mean(means)), sd, means, [r[1] for r in chunk], seeds, extra))
    return cells


def _chunks(seq, size):
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def _metadata(study, model, seed, config, **more):
    import scipy

    from . import __version__

    return {
        "study": study,
        "model": model.name,
        "seed": int(seed),
        "config": asdict(config),
        "stream_keys": "(n, repeat, slot); slot 0 tunes, slots 1..replicates evaluate",
        "versions": {"kboost": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        **more,
    }


def run_benchmark(
    model: SimulationModel,
    methods: Sequence[MethodConfig],
    n_list: Sequence[int],
    replicates: int = 100,
    repeats: int = 10,
    seed: int = 0,
    config: Optional[StudyConfig] = None,
    jobs: Optional[int] = None,
) -> BenchmarkReport:
    """Tune by CV, evaluate mean MSE(T) over replicates, repeat; per method and n."""
    config = replace(config or StudyConfig(), replicates=int(replicates), repeats=int(repeats))
    groups, tasks = [], []
    for method in methods:
        for n in n_list:
            groups.append((method.label, n, {}))
            tasks += [_Task(model, method, int(n), r, seed, config) for r in range(config.repeats)]
    cells = _cells(groups, _execute(tasks, jobs), seed, config)
    return BenchmarkReport("tables", model.name, cells, _metadata("tables", model, seed, config))


def run_lowrank_study(
    model: SimulationModel,
    n_list: Sequence[int],
    rank_list: Sequence[int] = (2, 5, 10, 15),
    seed: int = 0,
    config: Optional[StudyConfig] = None,
    jobs: Optional[int] = None,
    kernel: KernelKind = KernelKind.EPANECHNIKOV,
) -> BenchmarkReport:
    """Local-constant projection smoother truncated to each rank, plus full rank."""
    config = config or StudyConfig()
    groups, tasks = [], []
    for n in n_list:
        ranks = [int(d) for d in rank_list if int(d) < int(n)] + [int(n)]
        for d in ranks:
            method = MethodConfig(SmootherKind.PROJECTION_LC, kernel, config.grid_size, rank=None if d == n else d)
            groups.append((method.label, n, {"rank": "n" if d == n else d}))
            tasks += [_Task(model, method, int(n), r, seed, config) for r in range(config.repeats)]
    cells = _cells(groups, _execute(tasks, jobs), seed, config)
    return BenchmarkReport("lowrank", model.name, cells, _metadata("lowrank", model, seed, config, ranks=list(rank_list)))


def run_robust_study(
    model: SimulationModel,
    methods: Sequence[MethodConfig],
    n_list: Sequence[int],
    c_list: Sequence[float] = (1.0, 2.0),
    seed: int = 0,
    config: Optional[StudyConfig] = None,
    jobs: Optional[int] = None,
) -> BenchmarkReport:
    """Robust cells for each absolute Huber cutoff, paired with one L2 cell."""
    config = config or StudyConfig()
    groups, tasks = [], []
    for method in methods:
        base = replace(method, robust=None)
        for n in n_list:
            variants = [(base, {"robust": False, "c": None})]
            variants += [(replace(base, robust=RobustSpec(float(c))), {"robust": True, "c": float(c)}) for c in c_list]
            for m, extra in variants:
                groups.append((base.label, n, extra))
                tasks += [_Task(model, m, int(n), r, seed, config) for r in range(config.repeats)]
    cells = _cells(groups, _execute(tasks, jobs), seed, config)
    return BenchmarkReport("robust", model.name, cells, _metadata("robust", model, seed, config, c_list=list(c_list)))


# --------------------------------------------------------------------------
# real data


@dataclass(frozen=True)
class RealDataConfig:
    kernel: KernelKind = KernelKind.EPANECHNIKOV
    h_range: tuple = (5.0, 20.0)
    lam_range: tuple = (0.0, 5000.0)
    grid_count: int = 15
    b_max: int = 1000
    folds: int = 5
    seed: int = 0
    grid_size: int = 200
    pilot_b: int = 10
    scale: str = "qn"
    c_factors: tuple = (HUBER_FACTOR, 1.0, 1.6)
    smoothers: tuple = ("lc", "ll", "nw", "spline")
    psi_tol: float = 1e-6
    psi_max_iter: int = 100

    def method(self, smoother, cutoff=None) -> MethodConfig:
        robust = None if cutoff is None else RobustSpec(cutoff, self.psi_tol, self.psi_max_iter)
        return MethodConfig(SmootherKind.parse(smoother), self.kernel, self.grid_size, robust)

    def param_grid(self, smoother) -> np.ndarray:
        lo, hi = self.lam_range if SmootherKind.parse(smoother) is SmootherKind.CUBIC_SPLINE else self.h_range
        return np.linspace(lo, hi, int(self.grid_count))


def pilot_scale(data: Dataset, config: RealDataConfig = RealDataConfig(), param_grid=None):
    """Robust residual scale from a short L2 pilot fit.

    The pilot is local-constant projection boosting with ``pilot_b`` steps and
    a bandwidth picked by CV at that fixed step count, searched over
    ``param_grid`` (default: the configured bandwidth range).
    Returns ``(sigma, pilot_h)``.
    """
    method = config.method("lc")
    grid = config.param_grid("lc") if param_grid is None else np.asarray(param_grid, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cv = kfold_cv(data, method, grid, config.pilot_b, config.folds, config.seed)
    column = cv.loss[:, config.pilot_b]
    h = float(cv.params[int(np.argmin(column))])
    fit = boosted_fit(data, method, h, config.pilot_b)
    return robust_scale(data.y - fit, config.scale), h


def fixed_fit_mse(data: Dataset, method: MethodConfig, param: float, b: int) -> float:
    """Full-data MSE of the boosting fit at fixed ``(param, b)``."""
    return mse(data.y, boosted_fit(data, method, param, b))


def run_real_data(data: Dataset, config: RealDataConfig = RealDataConfig()) -> BenchmarkReport:
    """CV-tuned robust and L2 fits for every smoother, one robust set per cutoff factor."""
    sigma, pilot_h = pilot_scale(data, config)
    cells = []

    def tuned(method, smoother):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cv = kfold_cv(data, method, config.param_grid(smoother), config.b_max, config.folds, config.seed)
            return cv.best_param, cv.best_b, fixed_fit_mse(data, method, cv.best_param, cv.best_b)

    for smoother in config.smoothers:
        p, b, err = tuned(config.method(smoother), smoother)
        cells.append(BenchmarkCell(smoother, data.n, err, 0.0, [err], [(p, b)], {"cv_seed": config.seed}, {"robust": False, "c_factor": None}))
        for factor in config.c_factors:
            c = huber_constant(sigma, factor)
            p, b, err = tuned(config.method(smoother, c), smoother)
            cells.append(
                BenchmarkCell(smoother, data.n, err, 0.0, [err], [(p, b)], {"cv_seed": config.seed}, {"robust": True, "c_factor": float(factor), "c": c})
            )
    meta = {
        "study": "real",
        "sigma": sigma,
        "pilot_bandwidth": pilot_h,
        "config": {k: (v.value if isinstance(v, KernelKind) else v) for k, v in asdict(config).items()},
    }
    return BenchmarkReport("real", "data", cells, meta)
