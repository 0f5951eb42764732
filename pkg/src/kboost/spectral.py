"""Spectral view of symmetric smoothers and the boosting operator.

For a symmetric smoother ``S = U diag(lam) U^T``, ``b`` boosting steps give
``I - (I - S)^{b+1} = U diag(1 - (1 - lam)^{b+1}) U^T``. Keeping the top
``d`` eigenpairs yields the low-rank operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpectrumError
from .smoothers import SmootherKind, SmootherMatrix

__all__ = [
    "SpectralDecomposition",
    "LowRankOperator",
    "eigendecompose",
    "nonsymmetric_spectrum",
    "boosting_operator",
    "boosting_shrinkage",
    "default_rank",
    "approximation_error",
    "bias_variance_profile",
    "similarity_factors",
]

SPECTRUM_TOL = 1e-8


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # column k pairs with eigenvalues[k]
    source: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


@dataclass(frozen=True)
class LowRankOperator:
    eigenvalues: np.ndarray  # retained, length d
    eigenvectors: np.ndarray  # (n, d)
    b: int

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def shrinkage(self) -> np.ndarray:
        return boosting_shrinkage(self.eigenvalues, self.b)

    def apply(self, v) -> np.ndarray:
        U = self.eigenvectors
        v = np.asarray(v, dtype=float)
        if v.shape[0] != U.shape[0]:
            raise ValueError(f"length mismatch: operator is {U.shape[0]}-dimensional, got {v.shape[0]}")
        return U @ (self.shrinkage * (U.T @ v))

    def matrix(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.shrinkage) @ U.T


def _bounded_spectrum(kind) -> bool:
    return kind is not None and (SmootherKind.parse(kind).is_projection or SmootherKind.parse(kind) is SmootherKind.CUBIC_SPLINE)


def eigendecompose(S) -> SpectralDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    Accepts a ``SmootherMatrix`` (which must be flagged symmetric) or a plain
    symmetric array. For projection and spline smoothers eigenvalues within
    1e-8 of ``[0, 1]`` are clipped into it; larger excursions raise
    ``SpectrumError``.
    """
    if isinstance(S, SmootherMatrix):
        if not S.symmetric:
            raise ValueError(
                f"{S.kind.value} smoother is not symmetric; use nonsymmetric_spectrum for its eigenvalues"
            )
        W, kind, source = S.weights, S.kind, dict(S.params, kind=S.kind.value)
    else:
        W = np.asarray(S, dtype=float)
        if not np.allclose(W, W.T, rtol=0, atol=1e-12):
            raise ValueError("matrix is not symmetric; use nonsymmetric_spectrum for its eigenvalues")
        kind, source = None, {}
    lam, U = np.linalg.eigh(W)
    lam, U = lam[::-1].copy(), U[:, ::-1].copy()
    if _bounded_spectrum(kind):
        if lam[-1] < -SPECTRUM_TOL or lam[0] > 1 + SPECTRUM_TOL:
            raise SpectrumError(
                f"{kind.value} smoother spectrum [{lam[-1]:.3g}, {lam[0]:.3g}] leaves [0, 1]"
            )
        lam = np.clip(lam, 0.0, 1.0)
    return SpectralDecomposition(lam, U, source)


def nonsymmetric_spectrum(S) -> np.ndarray:
    """Complex eigenvalues of a general smoother, sorted by real part descending."""
    W = S.weights if isinstance(S, SmootherMatrix) else np.asarray(S, dtype=float)
    ev = np.linalg.eigvals(W).astype(complex)
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]


def boosting_shrinkage(eigenvalues, b: int) -> np.ndarray:
    """Diagonal of the boosting operator: ``1 - (1 - lam)^{b+1}``."""
    lam = np.asarray(eigenvalues, dtype=float)
    return 1.0 - (1.0 - lam) ** (int(b) + 1)


def _check_rank(d, n, minimum):
    d = int(d)
    if not minimum <= d <= n:
        raise ValueError(f"rank must lie in [{minimum}, {n}], got {d}")
    return d


def boosting_operator(dec: SpectralDecomposition, b: int, d: int | None = None) -> LowRankOperator:
    """``v -> sum_{k<=d} [1 - (1 - lam_k)^{b+1}] (u_k . v) u_k``."""
    if int(b) < 0:
        raise ValueError(f"boosting iterations must be nonnegative, got {b}")
    d = dec.n if d is None else _check_rank(d, dec.n, 1)
    return LowRankOperator(dec.eigenvalues[:d], dec.eigenvectors[:, :d], int(b))


def default_rank(h: float, support_width: float, c_rank: float = 1.0, n: int | None = None) -> int:
    """Rank ``ceil(c_rank * width / h)``, floored at 1 and capped at ``n``."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    d = max(1, math.ceil(c_rank * support_width / h - 1e-12))
    return d if n is None else min(int(n), d)


def approximation_error(dec: SpectralDecomposition, b: int, d: int) -> float:
    """Squared Frobenius distance between the full and rank-``d`` operators."""
    d = _check_rank(d, dec.n, 0)
    tail = boosting_shrinkage(dec.eigenvalues[d:], b)
    return float(np.sum(tail * tail))


def bias_variance_profile(dec: SpectralDecomposition, m_true, sigma2: float, b: int, d: int | None = None):
    """Average squared bias and variance of the rank-``d`` boosting fit.

    ``bias2 = n^-1 sum_{k<=d} gamma_k^2 (1-lam_k)^{2(b+1)}`` with
    ``gamma = U^T m``; ``var = sigma2 n^-1 sum_{k<=d} [1-(1-lam_k)^{b+1}]^2``.
    """
    m_true = np.asarray(m_true, dtype=float)
    n = dec.n
    if m_true.shape != (n,):
        raise ValueError(f"length mismatch: truth has {m_true.size} entries, decomposition {n}")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    d = n if d is None else _check_rank(d, n, 1)
    lam = dec.eigenvalues[:d]
    gamma = dec.eigenvectors[:, :d].T @ m_true
    keep = (1.0 - lam) ** (int(b) + 1)
    bias2 = float(np.sum(gamma**2 * keep**2) / n)
    var = float(sigma2 * np.sum((1.0 - keep) ** 2) / n)
    return bias2, var


def similarity_factors(S: SmootherMatrix, rank: int | None = None):
    """Factors ``(left, lam, right)`` with ``S = left diag(lam) right``.

    Symmetric smoothers use their eigendecomposition. The Nadaraya-Watson
    matrix ``D^{-1} K`` is similar to ``D^{-1/2} K D^{-1/2}``, so it gets real
    eigenvalues and a well-conditioned diagonalisation. Returns ``None`` for
    anything else.
    """
    if S.symmetric:
        dec = eigendecompose(S)
        d = dec.n if rank is None else _check_rank(rank, dec.n, 1)
        U = dec.eigenvectors[:, :d]
        return U, dec.eigenvalues[:d], U.T
    if S.kind is SmootherKind.NADARAYA_WATSON and "row_mass" in S.params:
        root = np.sqrt(S.params["row_mass"])
        sym = S.weights * (root[:, None] / root[None, :])
        sym = 0.5 * (sym + sym.T)
        lam, V = np.linalg.eigh(sym)
        lam, V = lam[::-1].copy(), V[:, ::-1].copy()
        d = lam.size if rank is None else _check_rank(rank, lam.size, 1)
        return V[:, :d] / root[:, None], lam[:d], V[:, :d].T * root[None, :]
    return None
