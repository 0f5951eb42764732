"""L2 boosting with a fixed linear smoother."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernels import KernelSpec, QuadratureGrid
from .smoothers import Dataset, SmootherMatrix, apply, projection_smoother_and_rows
from .spectral import similarity_factors

__all__ = ["BoostTrajectory", "l2_boost", "boost_predict", "predict_path", "spectral_paths"]


@dataclass
class BoostTrajectory:
    """Fits ``m_b`` for ``b = 0..B`` plus the cumulative smoother inputs.

    ``inputs[b]`` is the sum of every vector fed to the smoother up to step
    ``b``, so ``fits[b] == S @ inputs[b]`` and a test row ``t`` predicts
    ``t @ inputs[b]``.
    """

    fits: np.ndarray
    inputs: np.ndarray
    train_mse: np.ndarray
    smoother: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return self.fits.shape[0] - 1


def _meta(S: SmootherMatrix) -> dict:
    meta = {k: v for k, v in S.params.items() if k != "row_mass"}
    meta["kind"] = S.kind.value
    return meta


def l2_boost(S: SmootherMatrix, y, B: int) -> BoostTrajectory:
    """Run ``B`` residual-refitting steps after the initial smooth ``S y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (S.n,):
        raise ValueError(f"length mismatch: smoother is {S.n}x{S.n}, response has shape {y.shape}")
    B = int(B)
    if B < 0:
        raise ValueError(f"iterations must be nonnegative, got {B}")
    fits = np.empty((B + 1, S.n))
    inputs = np.empty((B + 1, S.n))
    fits[0] = apply(S, y)
    inputs[0] = y
    for b in range(1, B + 1):
        delta = y - fits[b - 1]
        fits[b] = fits[b - 1] + S.weights @ delta
        inputs[b] = inputs[b - 1] + delta
    train_mse = np.mean((y[None, :] - fits) ** 2, axis=1)
    return BoostTrajectory(fits, inputs, train_mse, _meta(S))


def predict_path(test_rows, traj: BoostTrajectory) -> np.ndarray:
    """Predictions for every iteration, shape ``(B+1, m)``."""
    return traj.inputs @ np.asarray(test_rows, dtype=float).T


def boost_predict(
    data: Dataset,
    spec: KernelSpec,
    order: int,
    grid: Optional[QuadratureGrid],
    b: int,
    x_test,
) -> np.ndarray:
    """Projection-smoother boosting prediction at ``x_test`` after ``b`` steps."""
    S, T = projection_smoother_and_rows(data, spec, order, grid, x_test)
    traj = l2_boost(S, data.y, b)
    return T @ traj.inputs[b]


def spectral_paths(S: SmootherMatrix, y, B: int, test_rows=None, rank: Optional[int] = None):
    """Closed-form fits (or test predictions) for all ``b = 0..B`` at once.

    Uses ``sum_{j<=b} (I - S)^j = L diag(sum_j (1-lam)^j) R`` from
    :func:`similarity_factors`. With ``rank`` the smoother is replaced by its
    top-``rank`` spectral truncation. Returns ``None`` when the smoother has no
    usable factorisation. Divergent paths (eigenvalues outside ``[0, 2]``)
    overflow to ``inf``/``nan`` rather than raising.
    """
    factors = similarity_factors(S, rank)
    if factors is None:
        return None
    left, lam, right = factors
    coef = right @ np.asarray(y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        powers = np.empty((int(B) + 1, lam.size))
        powers[0] = 1.0
        if B > 0:
            powers[1:] = 1.0 - lam
            np.cumprod(powers, axis=0, out=powers)
        geo = np.cumsum(powers, axis=0)
        if test_rows is None:
            return (geo * (lam * coef)) @ left.T
        return (geo * coef) @ (np.asarray(test_rows, dtype=float) @ left).T
