"""Kernel densities, scaled kernels and the boundary-corrected kernel.

Kernels are evaluated on ``u`` in bandwidth units; ``K_h(u) = K(u/h)/h``.
The boundary-corrected kernel renormalises ``K_h(. - v)`` so that its
integral over the covariate support equals one. The integral is taken with
the same trapezoid grid used downstream, so the normalisation is exact in
floating point rather than only up to quadrature error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import OutsideSupportError

__all__ = [
    "KernelKind",
    "KernelSpec",
    "QuadratureGrid",
    "kernel_eval",
    "scaled_kernel",
    "boundary_corrected_weight",
    "corrected_kernel_matrix",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Gaussian is treated as supported on [-6, 6] for reach checks only.
GAUSSIAN_REACH = 6.0


class KernelKind(str, enum.Enum):
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"
    TRIANGULAR = "triangular"
    UNIFORM = "uniform"
    BIWEIGHT = "biweight"

    @classmethod
    def parse(cls, name: "str | KernelKind") -> "KernelKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown kernel {name!r}; expected one of {valid}") from None

    @property
    def compact(self) -> bool:
        return self is not KernelKind.GAUSSIAN

    @property
    def reach(self) -> float:
        """Half-width of the (effective) support in bandwidth units."""
        return GAUSSIAN_REACH if self is KernelKind.GAUSSIAN else 1.0


def kernel_eval(kind, u):
    """Evaluate the base kernel density ``K(u)``.

    Accepts scalars or arrays; returns the same shape. Compact kernels live
    on ``[-1, 1]``.
    """
    kind = KernelKind.parse(kind)
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    if kind is KernelKind.GAUSSIAN:
        out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    elif kind is KernelKind.EPANECHNIKOV:
        out = np.where(a <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    elif kind is KernelKind.TRIANGULAR:
        out = np.where(a <= 1.0, 1.0 - a, 0.0)
    elif kind is KernelKind.UNIFORM:
        out = np.where(a <= 1.0, 0.5, 0.0)
    else:  # biweight
        t = 1.0 - u * u
        out = np.where(a <= 1.0, (15.0 / 16.0) * t * t, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        h = float(self.bandwidth)
        if not np.isfinite(h) or h <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", h)

    @property
    def reach(self) -> float:
        """Effective support radius in covariate units."""
        return self.kind.reach * self.bandwidth


def scaled_kernel(spec: KernelSpec, u):
    """``K_h(u) = K(u/h)/h``."""
    h = spec.bandwidth
    out = np.asarray(kernel_eval(spec.kind, np.asarray(u, dtype=float) / h)) / h
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform trapezoid grid over ``[lo, hi]``."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int = 200) -> "QuadratureGrid":
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ValueError(f"grid support must satisfy lo < hi, got [{lo}, {hi}]")
        size = int(size)
        if size < 2:
            raise ValueError(f"grid size must be at least 2, got {size}")
        points = np.linspace(lo, hi, size)
        points[0], points[-1] = lo, hi
        step = (hi - lo) / (size - 1)
        weights = np.full(size, step)
        weights[0] = weights[-1] = 0.5 * step
        points.setflags(write=False)
        weights.setflags(write=False)
        return cls(points, weights)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return len(self.points)

    def integrate(self, values) -> np.ndarray:
        """Trapezoid sum along the first axis of ``values``."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))


def corrected_kernel_matrix(spec: KernelSpec, grid: QuadratureGrid, v) -> np.ndarray:
    """Matrix of ``K_h(x_g, v_j)`` with shape ``(G, len(v))``.

    Column ``j`` integrates to one against ``grid.weights``.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    raw = scaled_kernel(spec, grid.points[:, None] - v[None, :])
    raw = np.asarray(raw).reshape(grid.size, v.size)
    mass = grid.weights @ raw
    bad = ~(mass > 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise OutsideSupportError(
            f"point outside smoothing support: {v[j]!r} has no kernel mass on "
            f"[{grid.lo}, {grid.hi}] at bandwidth {spec.bandwidth}"
        )
    return raw / mass


def boundary_corrected_weight(spec: KernelSpec, u, v: float, grid: QuadratureGrid):
    """Boundary-corrected kernel ``K_h(u, v)`` for grid location(s) ``u``.

    ``u`` outside the grid support gets weight zero.
    """
    v = float(v)
    raw = np.asarray(scaled_kernel(spec, grid.points - v))
    mass = float(grid.weights @ raw)
    if not mass > 0:
        raise OutsideSupportError(
            f"point outside smoothing support: {v!r} has no kernel mass on "
            f"[{grid.lo}, {grid.hi}] at bandwidth {spec.bandwidth}"
        )
    u = np.asarray(u, dtype=float)
    inside = (u >= grid.lo) & (u <= grid.hi)
    out = np.where(inside, np.asarray(scaled_kernel(spec, u - v)) / mass, 0.0)
    if out.ndim == 0:
        return float(out)
    return out
