"""Warping functions, the SRVF group action and elastic registration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _dp
from .errors import InvalidInputError
from .functions import (
    FunctionSample,
    Grid,
    SrvfSample,
    gradient,
    l2_norm,
    srvf_transform,
)

MONOTONE_EPS = 1e-9
POLISH_SWEEPS = 10
POLISH_GOLDEN_ITERS = 12


@dataclass(frozen=True)
class Warping:
    """Boundary-fixed, strictly increasing map ``gamma`` of [0, 1] onto itself."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.num_points,):
            raise InvalidInputError(
                f"expected {self.grid.num_points} warp values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("warp contains non-finite values")
        if values[0] != 0.0 or values[-1] != 1.0:
            raise InvalidInputError("warp must satisfy gamma(0) = 0 and gamma(1) = 1")
        if np.any(np.diff(values) <= 0):
            raise InvalidInputError("warp must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def identity(cls, grid: Grid) -> "Warping":
        return cls(grid, grid.t)

    @classmethod
    def from_values(cls, grid: Grid, values) -> "Warping":
        """Build a warp from approximate values, repairing pins and monotonicity."""
        return cls(grid, repair_monotone(values))

    def derivative(self) -> np.ndarray:
        return np.maximum(gradient(self.values, edge_order=1), 0.0)


def repair_monotone(values, eps: float = MONOTONE_EPS) -> np.ndarray:
    """Lift non-increasing steps by ``eps`` and rescale onto [0, 1]."""
    g = np.array(values, dtype=float)
    steps = np.diff(g)
    steps = np.where(steps > 0, steps, eps)
    g = np.concatenate([[0.0], np.cumsum(steps)])
    g /= g[-1]
    g[0], g[-1] = 0.0, 1.0
    # guard against rescaling collapsing a step to zero in floating point
    if np.any(np.diff(g) <= 0):
        g = np.maximum.accumulate(g)
        bad = np.diff(g) <= 0
        g[1:][bad] += eps
        g = (g - g[0]) / (g[-1] - g[0])
        g[-1] = 1.0
    return g


def _check_grid(a_grid: Grid, b_grid: Grid):
    if a_grid.num_points != b_grid.num_points:
        raise InvalidInputError(
            f"grid sizes differ: {a_grid.num_points} vs {b_grid.num_points}; resample first"
        )


def action_values(q: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Array form of the group action ``(q o gamma) sqrt(gamma')``."""
    t = np.linspace(0.0, 1.0, q.shape[-1])
    dgam = np.maximum(gradient(gamma, edge_order=1), 0.0)
    return np.interp(gamma, t, q) * np.sqrt(dgam)


def group_action(q: SrvfSample, gamma: Warping) -> SrvfSample:
    """Act on an SRVF by a warp: ``(q, gamma) = (q o gamma) sqrt(gamma')``."""
    _check_grid(q.grid, gamma.grid)
    return SrvfSample(q.grid, action_values(q.values, gamma.values), q.f0)


def warp_function(f: FunctionSample, gamma: Warping) -> FunctionSample:
    """Composition ``f o gamma`` by linear interpolation."""
    _check_grid(f.grid, gamma.grid)
    return FunctionSample(f.grid, np.interp(gamma.values, f.grid.t, f.values), f.label)


def compose(outer: Warping, inner: Warping) -> Warping:
    """``outer o inner``."""
    _check_grid(outer.grid, inner.grid)
    values = np.interp(inner.values, outer.grid.t, outer.values)
    return Warping.from_values(outer.grid, values)


def invert_warp(gamma: Warping) -> Warping:
    """Numerical inverse: swap the axes and re-interpolate on the uniform grid.

    A monotone cubic (PCHIP) interpolant through ``(gamma(t_j), t_j)`` is used
    so that smooth warps invert to high accuracy.
    """
    return Warping(gamma.grid, inverse_values(gamma.values))


def inverse_values(gamma: np.ndarray) -> np.ndarray:
    """Array form of :func:`invert_warp`."""
    t = np.linspace(0.0, 1.0, gamma.size)
    return repair_monotone(PchipInterpolator(gamma, t)(t))


def evaluate_warp(gamma: Warping, x) -> np.ndarray:
    """Evaluate ``gamma`` at arbitrary points of [0, 1] (monotone cubic)."""
    return PchipInterpolator(gamma.grid.t, gamma.values)(np.asarray(x, dtype=float))


def _path_to_warp(path_i: np.ndarray, path_j: np.ndarray, T: int) -> np.ndarray:
    idx = np.arange(T, dtype=float)
    return repair_monotone(np.interp(idx, path_i, path_j) / (T - 1))


def dp_register(q1: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, float]:
    """Lattice DP minimizing ``||q1 - (q2, gamma)||^2``.

    Returns the warp values and the optimal lattice energy (the sum of
    :func:`elasticcp._dp.segment_cost` along the path).
    """
    q1 = np.ascontiguousarray(q1, dtype=float)
    q2 = np.ascontiguousarray(q2, dtype=float)
    energy, pred_i, pred_j = _dp.dp_table(q1, q2, _dp.NEIGHBORS)
    path_i, path_j = _dp.backtrack(pred_i, pred_j)
    return _path_to_warp(path_i, path_j, q1.size), float(energy[-1, -1])


def optimal_warp_values(
    q1: np.ndarray, q2: np.ndarray, polish: bool = True
) -> tuple[np.ndarray, float]:
    """Array form of :func:`optimal_warp`; returns ``(gamma, distance)``."""
    q1 = np.ascontiguousarray(q1, dtype=float)
    q2 = np.ascontiguousarray(q2, dtype=float)
    T = q1.size
    grid = Grid(T)
    identity = grid.t
    base = l2_norm(q1 - q2, grid)
    if not np.any(q1) and not np.any(q2):
        return identity, 0.0
    gamma, _ = dp_register(q1, q2)
    if polish:
        gamma = repair_monotone(
            _dp.polish_warp(q1, q2, gamma, POLISH_SWEEPS, POLISH_GOLDEN_ITERS)
        )
    dist = l2_norm(q1 - action_values(q2, gamma), grid)
    if dist > base:
        return identity, base
    return gamma, dist


def optimal_warp(q1: SrvfSample, q2: SrvfSample, polish: bool = True) -> tuple[Warping, float]:
    """Register ``q2`` to ``q1``.

    The lattice DP solution is refined by :func:`elasticcp._dp.polish_warp`
    unless ``polish`` is false; refinement never increases the cost.

    Returns
    -------
    gamma : Warping
        Minimizing warp (DP solution, optionally polished).
    distance : float
        ``||q1 - (q2, gamma)||``; never larger than ``||q1 - q2||``.
    """
    _check_grid(q1.grid, q2.grid)
    gamma, dist = optimal_warp_values(q1.values, q2.values, polish=polish)
    return Warping(q1.grid, gamma), dist


def amplitude_distance(f1: FunctionSample, f2: FunctionSample) -> float:
    """Elastic amplitude distance, symmetrized by taking the smaller DP direction."""
    _check_grid(f1.grid, f2.grid)
    q1 = srvf_transform(f1).values
    q2 = srvf_transform(f2).values
    _, d12 = optimal_warp_values(q1, q2)
    _, d21 = optimal_warp_values(q2, q1)
    return min(d12, d21)
