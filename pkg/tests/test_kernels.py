import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from kboost.errors import OutsideSupportError
from kboost.kernels import (
    KernelKind,
    KernelSpec,
    QuadratureGrid,
    boundary_corrected_weight,
    corrected_kernel_matrix,
    kernel_eval,
    scaled_kernel,
)

ALL = list(KernelKind)


def test_kernel_values():
    assert kernel_eval("epanechnikov", 0.0) == pytest.approx(0.75)
    assert kernel_eval(KernelKind.EPANECHNIKOV, 1.5) == 0.0
    assert kernel_eval("gaussian", 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)


def test_scaled_kernel_values():
    assert scaled_kernel(KernelSpec("epanechnikov", 0.5), 0.0) == pytest.approx(1.5)
    assert scaled_kernel(KernelSpec("epanechnikov", 0.5), 0.6) == 0.0
    assert scaled_kernel(KernelSpec("gaussian", 2.0), 0.0) == pytest.approx(0.199471140200716, abs=1e-14)


@pytest.mark.parametrize("kind", ALL)
def test_kernel_integrates_to_one(kind):
    lo, hi = (-8, 8) if kind is KernelKind.GAUSSIAN else (-1, 1)
    val, _ = integrate.quad(lambda u: kernel_eval(kind, u), lo, hi, points=[0.0], limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)
    grid = QuadratureGrid.uniform(lo, hi, 400)
    assert grid.integrate(kernel_eval(kind, grid.points)) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind", ALL)
def test_quadrature_normalization_at_200(kind):
    # trapezoid on 200 points, the documented default
    grid = QuadratureGrid.uniform(-kind.reach, kind.reach, 200)
    assert abs(grid.integrate(kernel_eval(kind, grid.points)) - 1) < 1e-3


@given(st.sampled_from(ALL), st.floats(-10, 10, allow_nan=False))
def test_kernels_symmetric_nonnegative(kind, u):
    assert kernel_eval(kind, u) == kernel_eval(kind, -u)
    assert kernel_eval(kind, u) >= 0


@given(st.sampled_from([k for k in ALL if k.compact]), st.floats(1.0000001, 50))
def test_compact_support(kind, u):
    assert kernel_eval(kind, u) == 0.0


@given(st.floats(-30, 30))
def test_gaussian_positive(u):
    assert kernel_eval("gaussian", u) > 0


def test_kernel_parse():
    assert KernelKind.parse(" Gaussian ") is KernelKind.GAUSSIAN
    with pytest.raises(ValueError, match="unknown kernel"):
        KernelKind.parse("cosine")


def test_spec_rejects_bad_bandwidth():
    for h in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            KernelSpec("gaussian", h)


def test_grid_invariants():
    g = QuadratureGrid.uniform(-0.5, 0.5, 200)
    assert g.size == 200
    assert np.all(np.diff(g.points) > 0)
    assert g.points[0] == -0.5 and g.points[-1] == 0.5
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(g.weights > 0)
    with pytest.raises(ValueError):
        QuadratureGrid.uniform(0, 1, 1)
    with pytest.raises(ValueError):
        QuadratureGrid.uniform(1, 0, 10)


@pytest.mark.parametrize("kind", ALL)
@pytest.mark.parametrize("h", [0.05, 0.2, 0.7])
def test_corrected_kernel_integrates_to_one(kind, h):
    grid = QuadratureGrid.uniform(0.0, 1.0, 200)
    v = np.linspace(0, 1, 17)
    K = corrected_kernel_matrix(KernelSpec(kind, h), grid, v)
    assert np.max(np.abs(grid.weights @ K - 1)) < 1e-12


def test_corrected_weight_interior_matches_plain_kernel():
    spec = KernelSpec("epanechnikov", 0.1)
    grid = QuadratureGrid.uniform(0.0, 1.0, 20001)
    u = grid.points[9000:11000]
    w = boundary_corrected_weight(spec, u, 0.5, grid)
    plain = scaled_kernel(spec, u - 0.5)
    inside = plain > 0
    assert np.max(np.abs(w[inside] / plain[inside] - 1)) < 1e-6


def test_corrected_weight_boundary_sum():
    spec = KernelSpec("gaussian", 0.2)
    grid = QuadratureGrid.uniform(-0.5, 0.5, 200)
    w = boundary_corrected_weight(spec, grid.points, -0.5, grid)
    assert float(grid.weights @ w) == pytest.approx(1.0, abs=1e-12)


def test_uniform_kernel_doubles_at_edge():
    spec = KernelSpec("uniform", 0.01)
    grid = QuadratureGrid.uniform(0.0, 1.0, 20001)
    corrected = boundary_corrected_weight(spec, 0.0, 0.0, grid)
    plain = scaled_kernel(spec, 0.0)
    # the kernel's jump costs O(grid step / h) in the quadrature mass
    assert corrected / plain == pytest.approx(2.0, rel=1e-2)


def test_outside_support_error():
    spec = KernelSpec("epanechnikov", 0.1)
    grid = QuadratureGrid.uniform(0.0, 1.0, 200)
    with pytest.raises(OutsideSupportError, match="outside smoothing support"):
        boundary_corrected_weight(spec, 0.5, 2.0, grid)
