"""Loss criteria and k-fold cross-validation over (smoothing parameter, b)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._rng import stream
from .boosting import l2_boost, predict_path, spectral_paths
from .errors import DesignError, OutsideSupportError, SpectrumError
from .kernels import KernelKind, KernelSpec, QuadratureGrid
from .robust import RobustSpec, huber_rho, robust_boost
from .smoothers import (
    DEFAULT_GRID_SIZE,
    Dataset,
    SmootherKind,
    SplineBasis,
    build_nw_smoother,
    nw_test_rows,
    projection_smoother_and_rows,
)

__all__ = [
    "MethodConfig",
    "CvResult",
    "mse",
    "mse_t",
    "mse_rho",
    "kfold_indices",
    "kfold_cv",
    "fit_learner",
    "boosted_fit",
]


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(y, fit) -> float:
    y, fit = _pair(y, fit)
    return float(np.mean((y - fit) ** 2))


def mse_t(m_true, fit) -> float:
    """Mean squared distance between a fit and the true regression values."""
    return mse(m_true, fit)


def _cutoff(spec_or_c) -> float:
    return spec_or_c.cutoff if isinstance(spec_or_c, RobustSpec) else float(spec_or_c)


def mse_rho(y, fit, spec) -> float:
    """``(s^2/n) sum rho((y - fit)/s)`` with ``s^2`` the plain MSE; 0 if ``s = 0``."""
    y, fit = _pair(y, fit)
    return float(_mse_rho_rows((y - fit)[None, :], _cutoff(spec))[0])


def _mse_rho_rows(resid: np.ndarray, c: float) -> np.ndarray:
    s2 = np.mean(resid * resid, axis=1)
    out = np.zeros_like(s2)
    pos = s2 > 0
    s = np.sqrt(s2[pos])
    out[pos] = s2[pos] * np.mean(huber_rho(resid[pos] / s[:, None], c), axis=1)
    return out


@dataclass(frozen=True)
class MethodConfig:
    """One boosting method: smoother kind, kernel, and optional robustness/rank."""

    smoother: SmootherKind
    kernel: KernelKind = KernelKind.EPANECHNIKOV
    grid_size: int = DEFAULT_GRID_SIZE
    robust: Optional[RobustSpec] = None
    rank: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "smoother", SmootherKind.parse(self.smoother))
        object.__setattr__(self, "kernel", KernelKind.parse(self.kernel))
        if int(self.grid_size) < 2:
            raise ValueError(f"grid size must be at least 2, got {self.grid_size}")
        if self.rank is not None:
            if int(self.rank) < 1:
                raise ValueError(f"rank must be at least 1, got {self.rank}")
            if not self.smoother.is_projection and self.smoother is not SmootherKind.CUBIC_SPLINE:
                raise ValueError("low-rank boosting needs a symmetric smoother (lc, ll or spline)")
            if self.robust is not None:
                raise ValueError("low-rank boosting is L2 only")

    @property
    def label(self) -> str:
        if self.smoother is SmootherKind.CUBIC_SPLINE:
            return "spline"
        return f"{self.smoother.value}-{self.kernel.value[:2]}"


def fit_learner(train: Dataset, method: MethodConfig, param: float, x_test=None, basis=None):
    """Smoother on ``train`` for smoothing parameter ``param`` (h or lambda),
    plus its test rows at ``x_test`` when given."""
    kind = method.smoother
    if kind is SmootherKind.CUBIC_SPLINE:
        basis = SplineBasis(train.x) if basis is None else basis
        S = basis.smoother(param, support=train.support)
        T = None if x_test is None else basis.test_rows(param, x_test)
        return S, T
    spec = KernelSpec(method.kernel, param)
    if kind is SmootherKind.NADARAYA_WATSON:
        S = build_nw_smoother(train, spec)
        T = None if x_test is None else nw_test_rows(train, spec, x_test)
        return S, T
    grid = QuadratureGrid.uniform(train.support[0], train.support[1], method.grid_size)
    xt = train.x[:1] if x_test is None else x_test
    S, T = projection_smoother_and_rows(train, spec, kind.order, grid, xt)
    return S, (None if x_test is None else T)


def _rank_for(method, n):
    return None if method.rank is None else min(int(method.rank), n)


def boosted_fit(train: Dataset, method: MethodConfig, param: float, b: int, x_test=None) -> np.ndarray:
    """Boosting fit after ``b`` steps, at the training points or at ``x_test``.

    Full-rank L2 runs iterate the residual updates directly; low-rank runs
    apply the truncated spectral operator.
    """
    S, T = fit_learner(train, method, param, x_test)
    if method.robust is not None:
        traj = robust_boost(S, train.y, method.robust, b)
        return traj.fits[b] if T is None else T @ traj.inputs[b]
    if method.rank is not None:
        path = spectral_paths(S, train.y, b, T, rank=_rank_for(method, train.n))
        return path[b]
    traj = l2_boost(S, train.y, b)
    return traj.fits[b] if T is None else T @ traj.inputs[b]


def _held_out_paths(train, method, param, x_test, b_max, basis):
    S, T = fit_learner(train, method, param, x_test, basis)
    if method.robust is not None:
        return predict_path(T, robust_boost(S, train.y, method.robust, b_max))
    path = spectral_paths(S, train.y, b_max, T, rank=_rank_for(method, train.n))
    if path is None:
        path = predict_path(T, l2_boost(S, train.y, b_max))
    return path


@dataclass
class CvResult:
    params: np.ndarray
    loss: np.ndarray  # (len(params), b_max + 1), mean over folds
    best_param: float
    best_b: int
    best_loss: float
    k: int
    seed: int
    method: str = ""
    skipped: list = field(default_factory=list)

    @property
    def b_max(self) -> int:
        return self.loss.shape[1] - 1

    @property
    def grid(self):
        """Rows ``(param, b, loss)`` in parameter-major order."""
        return [
            (float(p), b, float(self.loss[i, b]))
            for i, p in enumerate(self.params)
            for b in range(self.loss.shape[1])
        ]

    @property
    def best(self):
        return self.best_param, self.best_b


def kfold_indices(n: int, k: int, seed: int, *stream_keys: int) -> list:
    """Seeded random partition of ``range(n)`` into ``k`` folds of near-equal size."""
    perm = stream(seed, 0xF01D, *stream_keys).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _select(params, loss):
    finite = np.isfinite(loss)
    if not finite.any():
        raise DesignError("no grid cell produced a finite cross-validation loss")
    best = np.min(loss[finite])
    # ties: smallest b first, then smallest parameter
    rows, cols = np.nonzero(loss == best)
    order = np.lexsort((params[rows], cols))
    i, b = int(rows[order[0]]), int(cols[order[0]])
    return float(params[i]), b, float(best)


def kfold_cv(
    data: Dataset,
    method: MethodConfig,
    param_grid: Sequence[float],
    b_max: int,
    k: int = 5,
    seed: int = 0,
    stream_keys: tuple = (),
) -> CvResult:
    """Mean held-out loss for every (parameter, b) cell and its argmin.

    The held-out criterion is MSE in L2 mode and MSE(rho) in robust mode.
    Cells where a fold cannot be fitted or predicted are set to ``inf``.
    """
    k = int(k)
    b_max = int(b_max)
    params = np.asarray(param_grid, dtype=float).ravel()
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if data.n < 2 * k:
        raise ValueError(f"{data.n} observations are too few for {k}-fold cross-validation")
    if params.size == 0:
        raise ValueError("parameter grid is empty")
    if b_max < 0:
        raise ValueError(f"b_max must be nonnegative, got {b_max}")

    folds = kfold_indices(data.n, k, seed, *stream_keys)
    total = np.zeros((params.size, b_max + 1))
    skipped = []
    for fi, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(data.n), test_idx, assume_unique=True)
        train = data.subset(train_idx)
        x_te, y_te = data.x[test_idx], data.y[test_idx]
        basis = None
        if method.smoother is SmootherKind.CUBIC_SPLINE:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                basis = SplineBasis(train.x)
        for pi, param in enumerate(params):
            if not np.isfinite(total[pi, 0]):
                continue
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    preds = _held_out_paths(train, method, param, x_te, b_max, basis)
            except (OutsideSupportError, DesignError, SpectrumError, np.linalg.LinAlgError) as exc:
                skipped.append((float(param), fi, str(exc)))
                total[pi] = np.inf
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                resid = y_te[None, :] - preds
                if method.robust is None:
                    fold_loss = np.mean(resid * resid, axis=1)
                else:
                    fold_loss = _mse_rho_rows(resid, method.robust.cutoff)
            fold_loss[~np.isfinite(fold_loss)] = np.inf
            total[pi] += fold_loss
    if skipped:
        warnings.warn(
            f"{len(skipped)} (parameter, fold) cells could not be fitted and were marked infinite",
            stacklevel=2,
        )
    loss = total / k
    best_param, best_b, best_loss = _select(params, loss)
    return CvResult(params, loss, best_param, best_b, best_loss, k, int(seed), method.label, skipped)
