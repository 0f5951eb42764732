"""Kernel-regression L2 boosting with symmetric projection smoothers."""

from .boosting import BoostTrajectory, boost_predict, l2_boost
from .kernels import KernelKind, KernelSpec, QuadratureGrid
from .robust import RobustSpec, pseudo_data_fit, robust_boost, robust_scale
from .smoothers import (
    Dataset,
    SmootherKind,
    SmootherMatrix,
    build_nw_smoother,
    build_projection_smoother,
    build_spline_smoother,
)
from .spectral import boosting_operator, eigendecompose
from .tuning import MethodConfig, kfold_cv

__version__ = "0.1.0"
