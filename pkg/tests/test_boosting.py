import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import design
from kboost.boosting import boost_predict, l2_boost, predict_path, spectral_paths
from kboost.kernels import KernelSpec
from kboost.smoothers import (
    build_nw_smoother,
    build_projection_smoother,
    build_spline_smoother,
    projection_smoother_and_rows,
    test_rows,
)
from kboost.spectral import boosting_operator, eigendecompose


@pytest.fixture(scope="module")
def setup50():
    data, truth = design(50, seed=21)
    S = build_projection_smoother(data, KernelSpec("epanechnikov", 0.4), 0)
    return data, truth, S


def test_b0_is_single_smooth(setup50):
    data, _, S = setup50
    traj = l2_boost(S, data.y, 0)
    assert traj.B == 0
    assert np.max(np.abs(traj.fits[0] - S.weights @ data.y)) < 1e-12


def test_recursion(setup50):
    data, _, S = setup50
    traj = l2_boost(S, data.y, 6)
    for b in range(1, 7):
        expected = traj.fits[b - 1] + S.weights @ (data.y - traj.fits[b - 1])
        assert np.max(np.abs(traj.fits[b] - expected)) < 1e-12
        assert np.max(np.abs(S.weights @ traj.inputs[b] - traj.fits[b])) < 1e-10


def test_identity_smoother_reproduces_y(data20):
    S = build_spline_smoother(data20, 0.0)
    traj = l2_boost(S, data20.y, 5)
    assert np.array_equal(traj.fits, np.tile(data20.y, (6, 1)))


def test_matches_spectral_operator(setup50):
    data, _, S = setup50
    op = boosting_operator(eigendecompose(S), 25)
    assert np.max(np.abs(l2_boost(S, data.y, 25).fits[25] - op.apply(data.y))) < 1e-9


def test_spectral_paths_match_iteration(setup50):
    data, _, S = setup50
    traj = l2_boost(S, data.y, 40)
    assert np.max(np.abs(spectral_paths(S, data.y, 40) - traj.fits)) < 1e-9
    T = test_rows(data, KernelSpec("epanechnikov", 0.4), 0, None, np.linspace(-0.5, 0.5, 9))
    assert np.max(np.abs(spectral_paths(S, data.y, 40, T) - predict_path(T, traj))) < 1e-9


def test_spectral_paths_nw():
    data = design(40, seed=4)[0]
    S = build_nw_smoother(data, KernelSpec("gaussian", 0.2))
    traj = l2_boost(S, data.y, 30)
    assert np.max(np.abs(spectral_paths(S, data.y, 30) - traj.fits)) < 1e-8


def test_spectral_paths_low_rank(setup50):
    data, _, S = setup50
    dec = eigendecompose(S)
    path = spectral_paths(S, data.y, 10, rank=5)
    for b in (0, 4, 10):
        assert np.max(np.abs(path[b] - boosting_operator(dec, b, 5).apply(data.y))) < 1e-10


def test_noiseless_train_mse_monotone(setup50):
    _, truth, S = setup50
    mse = l2_boost(S, truth, 60).train_mse
    assert np.all(np.diff(mse) <= 1e-15)


def test_residual_contraction(setup50):
    data, _, S = setup50
    fits = l2_boost(S, data.y, 60).fits
    norms = np.linalg.norm(data.y - fits, axis=1)
    assert np.all(np.diff(norms) <= 1e-12)


@given(st.floats(-5, 5), st.integers(0, 10**6))
def test_linearity(alpha, seed):
    data = design(20, seed=3)[0]
    S = build_projection_smoother(data, KernelSpec("gaussian", 0.3), 1)
    rng = np.random.default_rng(seed)
    y1, y2 = rng.normal(size=(2, 20))
    lhs = l2_boost(S, alpha * y1 + y2, 8).fits
    rhs = alpha * l2_boost(S, y1, 8).fits + l2_boost(S, y2, 8).fits
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize(
    "build",
    [
        lambda d: build_projection_smoother(d, KernelSpec("epanechnikov", 0.3), 1),
        lambda d: build_nw_smoother(d, KernelSpec("epanechnikov", 0.3)),
        lambda d: build_spline_smoother(d, 0.1),
    ],
)
def test_constant_preserved(data20, build):
    fits = l2_boost(build(data20), np.full(20, 2.5), 30).fits
    assert np.max(np.abs(fits - 2.5)) < 1e-8


def test_boost_predict_consistency(setup50):
    data, _, S = setup50
    spec = KernelSpec("epanechnikov", 0.4)
    traj = l2_boost(S, data.y, 12)
    for b in (0, 5, 12):
        assert np.max(np.abs(boost_predict(data, spec, 0, None, b, data.x) - traj.fits[b])) < 1e-9
    x_new = np.linspace(-0.5, 0.5, 7)
    _, T = projection_smoother_and_rows(data, spec, 0, None, x_new)
    assert np.max(np.abs(boost_predict(data, spec, 0, None, 0, x_new) - T @ data.y)) < 1e-12
    const = data.with_y(np.full(50, -1.25))
    assert np.max(np.abs(boost_predict(const, spec, 0, None, 9, x_new) + 1.25)) < 1e-8


def test_input_validation(setup50):
    _, _, S = setup50
    with pytest.raises(ValueError, match="length mismatch"):
        l2_boost(S, np.ones(49), 3)
    with pytest.raises(ValueError):
        l2_boost(S, np.ones(50), -1)
