"""Linear smoother matrices and their extension to new covariate values.

Four smoothers are provided:

* ``lc`` / ``ll`` -- projection smoothers built by integrating local
  constant / local linear least-squares projections over the covariate
  support with a boundary-corrected kernel. They are symmetric, doubly
  stochastic and have spectrum in ``[0, 1]``.
* ``nw`` -- the row-normalised Nadaraya-Watson matrix (not symmetric).
* ``spline`` -- the natural cubic smoothing spline hat matrix.

The projection smoother is assembled from per-grid-point factors. With
``a_g(X_i) = [K_h(x_g, X_i), (X_i - x_g)/h K_h(x_g, X_i)]`` and local Gram
matrix ``M_g = sum_j a_g(X_j) [1, (X_j - x_g)/h]``, each grid point
contributes ``q_g a_g(X_i)^T M_g^{-1} a_g(X_j)``. Writing
``q_g M_g^{-1} = L_g L_g^T`` turns the whole quadrature sum into one
product ``B B^T`` where row ``i`` of ``B`` stacks ``a_g(X_i) L_g`` over
``g``. Test rows reuse the same ``L_g`` so a test point equal to a training
point reproduces the training row.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DesignError, OutsideSupportError
from .kernels import KernelSpec, QuadratureGrid, corrected_kernel_matrix, scaled_kernel

__all__ = [
    "Dataset",
    "SmootherKind",
    "SmootherMatrix",
    "SplineConfig",
    "SplineBasis",
    "build_projection_smoother",
    "projection_smoother_and_rows",
    "build_nw_smoother",
    "nw_test_rows",
    "build_spline_smoother",
    "spline_test_rows",
    "test_row",
    "test_rows",
    "apply",
    "default_grid",
]

DEFAULT_GRID_SIZE = 200
_COND_LIMIT = 1e12
_RIDGE = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Paired samples ``(x_i, y_i)`` with a declared covariate support."""

    x: np.ndarray
    y: np.ndarray
    support: Optional[tuple] = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.size != y.size:
            raise ValueError(f"x and y lengths differ: {x.size} != {y.size}")
        if x.size < 2:
            raise ValueError(f"need at least 2 observations, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if self.support is None:
            lo, hi = float(x.min()), float(x.max())
        else:
            lo, hi = (float(v) for v in self.support)
        if not lo < hi:
            raise ValueError(f"support must satisfy lo < hi, got [{lo}, {hi}]")
        if x.min() < lo or x.max() > hi:
            raise ValueError(f"covariates fall outside the support [{lo}, {hi}]")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "support", (lo, hi))

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def width(self) -> float:
        return self.support[1] - self.support[0]

    def subset(self, idx) -> "Dataset":
        """Rows ``idx``; the support is kept so grids stay comparable."""
        return Dataset(self.x[idx], self.y[idx], self.support)

    def with_y(self, y) -> "Dataset":
        return Dataset(self.x, y, self.support)


class SmootherKind(str, enum.Enum):
    PROJECTION_LC = "lc"
    PROJECTION_LL = "ll"
    NADARAYA_WATSON = "nw"
    CUBIC_SPLINE = "spline"

    @classmethod
    def parse(cls, name) -> "SmootherKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown smoother {name!r}; expected one of {valid}") from None

    @property
    def is_projection(self) -> bool:
        return self in (SmootherKind.PROJECTION_LC, SmootherKind.PROJECTION_LL)

    @property
    def order(self) -> int:
        return 1 if self is SmootherKind.PROJECTION_LL else 0


@dataclass(frozen=True)
class SmootherMatrix:
    weights: np.ndarray
    kind: SmootherKind
    params: dict = field(default_factory=dict)
    symmetric: bool = False

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def apply(self, v) -> np.ndarray:
        return apply(self, v)


@dataclass(frozen=True)
class SplineConfig:
    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"spline lambda must be nonnegative, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)


def apply(S: SmootherMatrix, v) -> np.ndarray:
    """Fitted values ``S v``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != S.n:
        raise ValueError(f"length mismatch: smoother is {S.n}x{S.n}, vector has {v.shape[0]}")
    return S.weights @ v


def default_grid(data: Dataset, size: int = DEFAULT_GRID_SIZE) -> QuadratureGrid:
    return QuadratureGrid.uniform(data.support[0], data.support[1], size)


# --------------------------------------------------------------------------
# projection smoothers


@dataclass(frozen=True)
class _ProjectionFactors:
    spec: KernelSpec
    order: int
    grid: QuadratureGrid
    chol: np.ndarray  # (G, p+1, p+1); q_g M_g^{-1} = chol @ chol.T
    usable: np.ndarray  # grid points with nonzero local mass
    B: np.ndarray  # (n, G*(p+1))

    def rows_for(self, x_new) -> np.ndarray:
        """Factor rows for new points; mass on unusable grid points is dropped
        and the remainder renormalised to one."""
        x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
        k = corrected_kernel_matrix(self.spec, self.grid, x_new)  # (G, m)
        kept = (self.grid.weights * self.usable) @ k
        if np.any(~(kept > 0)):
            j = int(np.flatnonzero(~(kept > 0))[0])
            raise OutsideSupportError(
                f"point outside smoothing support: {x_new[j]!r} reaches no grid "
                "point that carries training data"
            )
        A = _local_design(k, x_new, self.grid, self.spec.bandwidth, self.order)
        Bt = np.einsum("gia,gab->igb", A, self.chol).reshape(x_new.size, -1)
        return Bt / kept[:, None]


def _local_design(k, x, grid, h, order):
    if order == 0:
        return k[:, :, None]
    d = (x[None, :] - grid.points[:, None]) / h
    return np.stack([k, k * d], axis=-1)


def _projection_factors(x, spec: KernelSpec, order: int, grid: QuadratureGrid) -> _ProjectionFactors:
    if order not in (0, 1):
        raise ValueError(f"local polynomial order must be 0 or 1, got {order!r}")
    x = np.asarray(x, dtype=float)
    k = corrected_kernel_matrix(spec, grid, x)  # (G, n)
    q = grid.weights
    h = spec.bandwidth
    G = grid.size

    if order == 0:
        mass = k.sum(axis=1)
        usable = mass > 0
        chol = np.zeros((G, 1, 1))
        chol[usable, 0, 0] = np.sqrt(q[usable] / mass[usable])
        healthy = usable
    else:
        d = (x[None, :] - grid.points[:, None]) / h
        m00 = k.sum(axis=1)
        m01 = (k * d).sum(axis=1)
        m11 = (k * d * d).sum(axis=1)
        M = np.empty((G, 2, 2))
        M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1] = m00, m01, m01, m11
        trace = m00 + m11
        usable = trace > 0
        s, V = np.linalg.eigh(M)
        ill = usable & (s[:, 0] * _COND_LIMIT <= s[:, 1])
        s = s + np.where(ill, _RIDGE * trace, 0.0)[:, None]
        s = np.where(usable[:, None], s, 1.0)
        scale = np.where(usable, q, 0.0)[:, None] / s
        chol = V * np.sqrt(scale)[:, None, :]
        healthy = usable & ~ill

    if not np.any(healthy):
        raise DesignError(
            f"bandwidth too small for design: no grid point has a usable local "
            f"design at h={h}"
        )
    A = _local_design(k, x, grid, h, order)
    B = np.einsum("gia,gab->igb", A, chol).reshape(x.size, -1)
    return _ProjectionFactors(spec, order, grid, chol, usable, B)


def _projection_params(data, spec, order, grid):
    return {
        "kernel": spec.kind.value,
        "bandwidth": spec.bandwidth,
        "order": order,
        "grid_size": grid.size,
        "support": data.support,
    }


def _symmetrise(M):
    return 0.5 * (M + M.T)


def build_projection_smoother(
    data: Dataset, spec: KernelSpec, order: int = 0, grid: Optional[QuadratureGrid] = None
) -> SmootherMatrix:
    """Projection smoother ``H*_p`` for local polynomial order ``p`` in {0, 1}."""
    grid = default_grid(data) if grid is None else grid
    f = _projection_factors(data.x, spec, order, grid)
    H = _symmetrise(f.B @ f.B.T)
    kind = SmootherKind.PROJECTION_LL if order == 1 else SmootherKind.PROJECTION_LC
    return SmootherMatrix(H, kind, _projection_params(data, spec, order, grid), symmetric=True)


def projection_smoother_and_rows(
    data: Dataset, spec: KernelSpec, order: int, grid: Optional[QuadratureGrid], x_test
):
    """Build ``H*`` and its test-point rows from one set of grid factors."""
    grid = default_grid(data) if grid is None else grid
    f = _projection_factors(data.x, spec, order, grid)
    H = _symmetrise(f.B @ f.B.T)
    kind = SmootherKind.PROJECTION_LL if order == 1 else SmootherKind.PROJECTION_LC
    S = SmootherMatrix(H, kind, _projection_params(data, spec, order, grid), symmetric=True)
    return S, f.rows_for(x_test) @ f.B.T


def test_rows(data: Dataset, spec: KernelSpec, order: int, grid: Optional[QuadratureGrid], x_test) -> np.ndarray:
    """Weight rows of the projection smoother at new points, shape ``(m, n)``."""
    grid = default_grid(data) if grid is None else grid
    f = _projection_factors(data.x, spec, order, grid)
    return f.rows_for(x_test) @ f.B.T


def test_row(data: Dataset, spec: KernelSpec, order: int, grid: Optional[QuadratureGrid], x_test: float) -> np.ndarray:
    """Weight row at a single new point ``x_test``; it sums to one."""
    lo, hi = data.support
    x_test = float(x_test)
    h = spec.bandwidth
    if x_test < lo - h or x_test > hi + h:
        raise OutsideSupportError(
            f"point outside smoothing support: {x_test!r} is more than one bandwidth "
            f"outside [{lo}, {hi}]"
        )
    return test_rows(data, spec, order, grid, [x_test])[0]


# test_row/test_rows are library functions, not pytest tests
test_row.__test__ = False
test_rows.__test__ = False


# --------------------------------------------------------------------------
# Nadaraya-Watson


def build_nw_smoother(data: Dataset, spec: KernelSpec) -> SmootherMatrix:
    Kmat = np.asarray(scaled_kernel(spec, data.x[:, None] - data.x[None, :]))
    mass = Kmat.sum(axis=1)
    if np.any(~(mass > 0)):
        raise RuntimeError("Nadaraya-Watson row with zero kernel mass")
    params = {"kernel": spec.kind.value, "bandwidth": spec.bandwidth, "row_mass": mass}
    return SmootherMatrix(Kmat / mass[:, None], SmootherKind.NADARAYA_WATSON, params, symmetric=False)


def nw_test_rows(data: Dataset, spec: KernelSpec, x_test) -> np.ndarray:
    x_test = np.atleast_1d(np.asarray(x_test, dtype=float))
    Kmat = np.asarray(scaled_kernel(spec, x_test[:, None] - data.x[None, :])).reshape(x_test.size, data.n)
    mass = Kmat.sum(axis=1)
    if np.any(~(mass > 0)):
        j = int(np.flatnonzero(~(mass > 0))[0])
        raise OutsideSupportError(
            f"point outside smoothing support: no training covariate within kernel reach of {x_test[j]!r}"
        )
    return Kmat / mass[:, None]


# --------------------------------------------------------------------------
# natural cubic smoothing spline


class SplineBasis:
    """Penalty structure of the natural cubic spline on the data's knots.

    The fit minimises ``sum (y_i - f(x_i))^2 + lam * int f''^2``. Tied
    covariates are merged into one weighted knot; this is the limit of any
    vanishing jitter, because the penalty forces tied fitted values to agree.
    """

    def __init__(self, x):
        x = np.asarray(x, dtype=float)
        knots, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
        if knots.size < x.size:
            warnings.warn(
                f"{x.size - knots.size} tied covariate values merged into weighted knots",
                stacklevel=3,
            )
        self.x = x
        self.knots = knots
        self.inverse = inverse
        self.counts = counts.astype(float)
        self.u = knots.size
        self.Q, self.R_banded = self._penalty_parts(knots)

    @staticmethod
    def _penalty_parts(t):
        u = t.size
        if u < 3:
            return np.zeros((u, 0)), np.zeros((2, 0))
        h = np.diff(t)
        m = u - 2
        Q = np.zeros((u, m))
        c = np.arange(m)
        Q[c, c] = 1.0 / h[:-1]
        Q[c + 1, c] = -1.0 / h[:-1] - 1.0 / h[1:]
        Q[c + 2, c] = 1.0 / h[1:]
        Rb = np.zeros((2, m))  # upper banded storage of the tridiagonal R
        Rb[1] = (h[:-1] + h[1:]) / 3.0
        Rb[0, 1:] = h[1:-1] / 6.0
        return Q, Rb

    def _knot_smoother(self, lam: float) -> np.ndarray:
        """``(W + lam K)^{-1}`` on the unique knots, W = diag(counts).

        With ``R = U^T U`` and ``Qw = W^{-1/2} Q``, stack ``[U; sqrt(lam) Qw]``
        and take its thin QR factor ``Z``; then
        ``(I + lam Qw R^{-1} Qw^T)^{-1} = I - Z2 Z2^T`` for the bottom block
        ``Z2``. This avoids the normal equations, whose condition number
        explodes for nearly tied knots.
        """
        winv = 1.0 / self.counts
        m = self.Q.shape[1]
        if lam == 0.0 or m == 0:
            return np.diag(winv)
        root = np.sqrt(winv)
        Ub = linalg.cholesky_banded(self.R_banded)  # upper bidiagonal
        U = np.diag(Ub[1]) + np.diag(Ub[0, 1:], 1)
        stacked = np.vstack([U, np.sqrt(lam) * (self.Q * root[:, None])])
        Z, _ = linalg.qr(stacked, mode="economic")
        # Z2 is orthogonal to W^{1/2}[1, t] in exact arithmetic; projecting
        # out that span keeps constants and lines exactly reproduced even
        # when tiny knot gaps inflate the rounding in the QR factor
        sw = np.sqrt(self.counts)
        N, _ = np.linalg.qr(np.column_stack([sw, sw * (self.knots - self.knots.mean())]))
        Z2 = Z[m:]
        Z2 = Z2 - N @ (N.T @ Z2)
        inner = np.eye(self.u) - Z2 @ Z2.T
        return _symmetrise(inner * root[:, None] * root[None, :])

    def _expand(self, Su):
        idx = self.inverse
        return Su[np.ix_(idx, idx)]

    def smoother(self, lam: float, support=None) -> SmootherMatrix:
        cfg = SplineConfig(lam)
        S = self._expand(self._knot_smoother(cfg.lam))
        params = {"lambda": cfg.lam}
        if support is not None:
            params["support"] = support
        return SmootherMatrix(S, SmootherKind.CUBIC_SPLINE, params, symmetric=True)

    def _second_derivatives(self, g):
        """Interior second derivatives ``R^{-1} Q^T g`` (columns of ``g``)."""
        if self.Q.shape[1] == 0:
            return np.zeros((0,) + g.shape[1:])
        return linalg.solveh_banded(self.R_banded, self.Q.T @ g)

    def evaluation_matrix(self, x_new) -> np.ndarray:
        """Linear map from knot values to spline values at ``x_new``.

        Natural boundary conditions: linear extrapolation outside the knots.
        """
        x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
        t = self.knots
        u = self.u
        m = x_new.size
        E = np.zeros((m, u))
        if u == 1:
            E[:, 0] = 1.0
            return E
        gam_map = np.zeros((u, u))  # knot values -> second derivative at all knots
        if u >= 3:
            gam_map[1:-1] = self._second_derivatives(np.eye(u))
        Gm = np.zeros((m, u))  # coefficients on second derivatives

        i = np.clip(np.searchsorted(t, x_new, side="right") - 1, 0, u - 2)
        h = t[i + 1] - t[i]
        left = x_new < t[0]
        right = x_new > t[-1]
        inside = ~(left | right)
        rows = np.arange(m)

        a = (x_new - t[i]) / h
        E[rows[inside], i[inside]] += 1.0 - a[inside]
        E[rows[inside], i[inside] + 1] += a[inside]
        p = (x_new - t[i]) * (t[i + 1] - x_new) / 6.0
        Gm[rows[inside], i[inside] + 1] -= (p * (1.0 + a))[inside]
        Gm[rows[inside], i[inside]] -= (p * (2.0 - a))[inside]

        h0 = t[1] - t[0]
        if np.any(left):
            dx = x_new[left] - t[0]
            # f'(t_0) = (g_1 - g_0)/h0 - h0 gamma_1 / 6
            E[rows[left], 0] += 1.0 - dx / h0
            E[rows[left], 1] += dx / h0
            Gm[rows[left], 1] -= dx * h0 / 6.0
        hn = t[-1] - t[-2]
        if np.any(right):
            dx = x_new[right] - t[-1]
            # f'(t_n) = (g_n - g_{n-1})/hn + hn gamma_{n-1} / 6
            E[rows[right], -1] += 1.0 + dx / hn
            E[rows[right], -2] -= dx / hn
            Gm[rows[right], -2] += dx * hn / 6.0
        return E + Gm @ gam_map

    def test_rows(self, lam: float, x_new) -> np.ndarray:
        Su = self._knot_smoother(SplineConfig(lam).lam)
        knot_rows = self.evaluation_matrix(x_new) @ Su  # (m, u)
        return knot_rows[:, self.inverse]


def build_spline_smoother(data: Dataset, config) -> SmootherMatrix:
    """Cubic smoothing spline hat matrix ``(W + lam K)^{-1}`` lifted to all
    observations; ``lam = 0`` with distinct covariates gives the identity."""
    lam = config.lam if isinstance(config, SplineConfig) else float(config)
    return SplineBasis(data.x).smoother(lam, support=data.support)


def spline_test_rows(data: Dataset, config, x_test) -> np.ndarray:
    lam = config.lam if isinstance(config, SplineConfig) else float(config)
    return SplineBasis(data.x).test_rows(lam, x_test)
