"""Huber-robustified boosting through pseudo data.

The pseudo response ``z = m + psi(y - m)/2`` turns the Huber score equation
into a least-squares one, so each robust fit is a fixed point of
``m -> S (m + psi(y - m)/2)``. Since ``psi(r)/2 = clip(r, -c, c)``, an
infinite cutoff reduces every routine here to its L2 counterpart.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from statsmodels.robust.scale import qn_scale

from .boosting import BoostTrajectory, _meta
from .errors import DegenerateScaleError
from .smoothers import SmootherMatrix, apply

__all__ = [
    "RobustSpec",
    "PseudoFit",
    "huber_rho",
    "huber_psi",
    "pseudo_data_fit",
    "robust_boost",
    "robust_scale",
    "huber_constant",
]

HUBER_FACTOR = 1.345
QN_CONSTANT = 2.2219


@dataclass(frozen=True)
class RobustSpec:
    cutoff: float
    psi_tol: float = 1e-6
    psi_max_iter: int = 100
    huber_factor: float = HUBER_FACTOR

    def __post_init__(self):
        if not float(self.cutoff) > 0:
            raise ValueError(f"Huber cutoff must be positive, got {self.cutoff!r}")
        if not float(self.psi_tol) > 0:
            raise ValueError(f"psi_tol must be positive, got {self.psi_tol!r}")
        if int(self.psi_max_iter) < 1:
            raise ValueError(f"psi_max_iter must be at least 1, got {self.psi_max_iter!r}")
        object.__setattr__(self, "cutoff", float(self.cutoff))


@dataclass(frozen=True)
class PseudoFit:
    fit: np.ndarray
    iterations_used: int
    converged: bool
    pseudo_data: np.ndarray


def huber_rho(x, c: float):
    """Huber loss: ``x^2`` inside ``|x| <= c``, ``2c|x| - c^2`` outside."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if math.isinf(c):
        out = x * x
    else:
        out = np.where(a <= c, x * x, 2.0 * c * a - c * c)
    return float(out) if out.ndim == 0 else out


def huber_psi(x, c: float):
    """Derivative of :func:`huber_rho`: ``2 clip(x, -c, c)``."""
    out = 2.0 * np.clip(np.asarray(x, dtype=float), -c, c)
    return float(out) if out.ndim == 0 else out


def _half_psi(r, c):
    return np.clip(r, -c, c)


def pseudo_data_fit(S: SmootherMatrix, y, spec: RobustSpec) -> PseudoFit:
    """Fixed-point iteration ``m <- S (m + psi(y - m)/2)`` from ``m = S y``.

    Stops once ``|S z(m) - m|_inf <= psi_tol (1 + |m|_inf)`` and returns that
    ``m`` with its pseudo data ``z(m)``; on hitting the iteration cap the last
    iterate is returned with ``converged=False``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (S.n,):
        raise ValueError(f"length mismatch: smoother is {S.n}x{S.n}, response has shape {y.shape}")
    c = spec.cutoff
    W = S.weights
    m = apply(S, y)
    z = y
    for k in range(1, int(spec.psi_max_iter) + 1):
        z = m + _half_psi(y - m, c)
        m_next = W @ z
        if np.max(np.abs(m_next - m)) <= spec.psi_tol * (1.0 + np.max(np.abs(m))):
            return PseudoFit(m, k, True, z)
        m = m_next
    return PseudoFit(m, int(spec.psi_max_iter), False, m + _half_psi(y - m, c))


def robust_boost(S: SmootherMatrix, y, spec: RobustSpec, B: int) -> BoostTrajectory:
    """Boosting where every smoothing step is a pseudo-data robust fit.

    ``inputs[b]`` accumulates the final pseudo data of each step, so test
    rows predict through :func:`kboost.boosting.predict_path` as in L2 mode.
    Steps whose inner iteration hit the cap are counted in
    ``smoother['nonconverged']``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (S.n,):
        raise ValueError(f"length mismatch: smoother is {S.n}x{S.n}, response has shape {y.shape}")
    B = int(B)
    if B < 0:
        raise ValueError(f"iterations must be nonnegative, got {B}")
    fits = np.empty((B + 1, S.n))
    inputs = np.empty((B + 1, S.n))
    misses = 0
    pf = pseudo_data_fit(S, y, spec)
    fits[0], inputs[0] = pf.fit, pf.pseudo_data
    misses += not pf.converged
    for b in range(1, B + 1):
        pf = pseudo_data_fit(S, y - fits[b - 1], spec)
        fits[b] = fits[b - 1] + pf.fit
        inputs[b] = inputs[b - 1] + pf.pseudo_data
        misses += not pf.converged
    if misses:
        warnings.warn(f"pseudo-data iteration hit its cap in {misses} of {B + 1} boosting steps", stacklevel=2)
    meta = _meta(S)
    meta["nonconverged"] = misses
    train_mse = np.mean((y[None, :] - fits) ** 2, axis=1)
    return BoostTrajectory(fits, inputs, train_mse, meta)


def _qn_correction(n: int) -> float:
    # Croux & Rousseeuw small-sample factors
    small = {2: 0.399, 3: 0.994, 4: 0.512, 5: 0.844, 6: 0.611, 7: 0.857, 8: 0.669, 9: 0.872}
    if n in small:
        return small[n]
    return n / (n + 1.4) if n % 2 else n / (n + 3.8)


def robust_scale(residuals, method: str = "qn") -> float:
    """Location-free robust scale of ``residuals``.

    ``qn``: the first quartile of pairwise absolute differences, times 2.2219
    and the finite-sample factor. ``mad``: 1.4826 times the median absolute
    deviation.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 2:
        raise ValueError("robust scale needs at least 2 residuals")
    if np.all(r == r[0]):
        raise DegenerateScaleError("degenerate scale: all residuals are identical")
    if method == "qn":
        s = float(qn_scale(r, c=QN_CONSTANT)) * _qn_correction(r.size)
    elif method == "mad":
        s = 1.482602218505602 * float(np.median(np.abs(r - np.median(r))))
    else:
        raise ValueError(f"unknown scale estimator {method!r}; expected 'qn' or 'mad'")
    if not s > 0:
        raise DegenerateScaleError("degenerate scale: estimate is zero")
    return s


def huber_constant(sigma: float, factor: float = HUBER_FACTOR) -> float:
    if not sigma > 0:
        raise ValueError(f"scale must be positive, got {sigma!r}")
    return float(factor) * float(sigma)
