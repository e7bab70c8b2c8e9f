"""Elastic functional changepoint detection.

Functions are registered in the square-root velocity framework, split into
amplitude (aligned shapes) and phase (warping functions), and each part is
tested for a single change in mean with CUSUM statistics.
"""

from .changepoint import (
    ChangepointResult,
    TestConfig,
    amplitude_test_ff,
    amplitude_test_pca,
    cross_sectional_test,
    cross_sectional_test_pca,
    p_value,
    phase_test_ff,
    phase_test_pca,
    run_method,
    simulate_limit_sup,
)
from .errors import DegenerateDataError, DegenerateGeometryError, ElasticError, InvalidInputError
from .fpca import FixedComponents, FpcaResult, VarianceFraction, horizontal_fpca, select_components, vertical_fpca
from .functions import FunctionSample, Grid, SmoothingConfig, SrvfSample, box_smooth, resample, srvf_inverse, srvf_transform
from .karcher import AlignmentResult, karcher_mean_align, prefix_means
from .phase import PsiSample, ShootingVector, exp_map, from_psi, karcher_mean_warps, log_map, phase_distance, to_psi
from .simgen import SimSpec, gen_amplitude_change, gen_null, gen_phase_change, gen_sensitivity, generate
from .warping import Warping, amplitude_distance, compose, group_action, invert_warp, optimal_warp, warp_function

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "ChangepointResult",
    "DegenerateDataError",
    "DegenerateGeometryError",
    "ElasticError",
    "FixedComponents",
    "FpcaResult",
    "FunctionSample",
    "Grid",
    "InvalidInputError",
    "PsiSample",
    "ShootingVector",
    "SimSpec",
    "SmoothingConfig",
    "SrvfSample",
    "TestConfig",
    "VarianceFraction",
    "Warping",
    "amplitude_distance",
    "amplitude_test_ff",
    "amplitude_test_pca",
    "box_smooth",
    "compose",
    "cross_sectional_test",
    "cross_sectional_test_pca",
    "exp_map",
    "from_psi",
    "gen_amplitude_change",
    "gen_null",
    "gen_phase_change",
    "gen_sensitivity",
    "generate",
    "group_action",
    "horizontal_fpca",
    "invert_warp",
    "karcher_mean_align",
    "karcher_mean_warps",
    "log_map",
    "optimal_warp",
    "p_value",
    "phase_distance",
    "phase_test_ff",
    "phase_test_pca",
    "prefix_means",
    "resample",
    "run_method",
    "select_components",
    "simulate_limit_sup",
    "srvf_inverse",
    "srvf_transform",
    "to_psi",
    "vertical_fpca",
    "warp_function",
]
