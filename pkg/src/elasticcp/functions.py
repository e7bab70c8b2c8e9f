"""Grid-based functions, quadrature, smoothing and the SRVF transform pair.

Every function lives on a uniform grid over [0, 1]. The original domain of
the data (for example ``[-6, 6]`` or day-of-year) is carried on the
:class:`Grid` only for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InvalidInputError


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Uniform sampling grid on [0, 1] with an attached original domain."""

    num_points: int
    domain_min: float = 0.0
    domain_max: float = 1.0

    def __post_init__(self):
        if int(self.num_points) != self.num_points or self.num_points < 3:
            raise InvalidInputError(f"grid needs at least 3 points, got {self.num_points}")
        if not self.domain_max > self.domain_min:
            raise InvalidInputError("domain_max must exceed domain_min")
        object.__setattr__(self, "num_points", int(self.num_points))

    @property
    def t(self) -> np.ndarray:
        """Internal sample locations ``j / (T - 1)``."""
        return np.arange(self.num_points) / (self.num_points - 1)

    @property
    def step(self) -> float:
        return 1.0 / (self.num_points - 1)

    @property
    def original(self) -> np.ndarray:
        """Sample locations mapped back to the original domain."""
        return self.to_original(self.t)

    def to_original(self, x):
        return self.domain_min + (self.domain_max - self.domain_min) * np.asarray(x, dtype=float)

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.domain_min) / (self.domain_max - self.domain_min)

    def with_points(self, num_points: int) -> "Grid":
        return Grid(num_points, self.domain_min, self.domain_max)


@dataclass(frozen=True)
class FunctionSample:
    """Values ``f(t_j)`` of a real function on a grid."""

    grid: Grid
    values: np.ndarray
    label: Optional[Hashable] = None

    def __post_init__(self):
        values = _frozen(self.values, "function values")
        if values.size != self.grid.num_points:
            raise InvalidInputError(
                f"expected {self.grid.num_points} values, got {values.size}"
            )
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SrvfSample:
    """Square-root velocity function ``q`` plus the initial value ``f(0)``."""

    grid: Grid
    values: np.ndarray
    f0: float = 0.0

    def __post_init__(self):
        values = _frozen(self.values, "SRVF values")
        if values.size != self.grid.num_points:
            raise InvalidInputError(
                f"expected {self.grid.num_points} values, got {values.size}"
            )
        if not np.isfinite(self.f0):
            raise InvalidInputError("f0 must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "f0", float(self.f0))


@dataclass(frozen=True)
class SmoothingConfig:
    """Box-filter settings: odd ``window`` width in samples, repeated ``passes`` times."""

    window: int = 3
    passes: int = 1

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidInputError(f"window must be a positive odd integer, got {self.window}")
        if self.passes < 0:
            raise InvalidInputError(f"passes must be nonnegative, got {self.passes}")


def trapezoid_weights(num_points: int) -> np.ndarray:
    """Quadrature weights of the trapezoidal rule on the uniform unit grid."""
    w = np.full(num_points, 1.0 / (num_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def l2_inner(a, b, grid: Grid) -> float:
    """Trapezoidal approximation of the integral of ``a * b`` over [0, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != grid.num_points or b.shape[-1] != grid.num_points:
        raise InvalidInputError(
            f"length mismatch: {a.shape[-1]}, {b.shape[-1]} vs grid of {grid.num_points}"
        )
    return float(np.dot(a * b, trapezoid_weights(grid.num_points)))


def l2_norm(a, grid: Grid) -> float:
    return float(np.sqrt(max(l2_inner(a, a, grid), 0.0)))


def gradient(values: np.ndarray, edge_order: int = 2) -> np.ndarray:
    """Centered differences on the unit grid, one-sided at the endpoints."""
    values = np.asarray(values, dtype=float)
    h = 1.0 / (values.shape[-1] - 1)
    return np.gradient(values, h, axis=-1, edge_order=edge_order)


def cumulative_integral(values: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid on the unit grid, starting at zero."""
    values = np.asarray(values, dtype=float)
    h = 1.0 / (values.shape[-1] - 1)
    return cumulative_trapezoid(values, dx=h, axis=-1, initial=0.0)


def srvf_values(f: np.ndarray) -> np.ndarray:
    """Array form of :func:`srvf_transform`; works row-wise on 2-D input."""
    df = gradient(f)
    return np.sign(df) * np.sqrt(np.abs(df))


def srvf_transform(f: FunctionSample) -> SrvfSample:
    """Map ``f`` to its SRVF ``q = sign(f') sqrt(|f'|)``."""
    return SrvfSample(f.grid, srvf_values(f.values), f0=f.values[0])


def srvf_inverse(q: SrvfSample, label=None) -> FunctionSample:
    """Rebuild ``f(t) = f(0) + int_0^t q|q| ds``."""
    values = q.f0 + cumulative_integral(q.values * np.abs(q.values))
    return FunctionSample(q.grid, values, label)


def box_smooth(f: FunctionSample, cfg: SmoothingConfig) -> FunctionSample:
    """Centered moving average; the window is truncated near the boundaries."""
    T = f.grid.num_points
    if cfg.window > T:
        raise InvalidInputError(f"window {cfg.window} exceeds number of points {T}")
    values = f.values
    half = cfg.window // 2
    idx = np.arange(T)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, T - 1) + 1
    for _ in range(cfg.passes):
        csum = np.concatenate([[0.0], np.cumsum(values)])
        values = (csum[hi] - csum[lo]) / (hi - lo)
    return FunctionSample(f.grid, values, f.label)


def resample(f: FunctionSample, new_T: int) -> FunctionSample:
    """Linear interpolation onto a uniform grid with ``new_T`` points."""
    new_grid = f.grid.with_points(new_T)
    if new_T == f.grid.num_points:
        return FunctionSample(new_grid, f.values, f.label)
    values = np.interp(new_grid.t, f.grid.t, f.values)
    values[0], values[-1] = f.values[0], f.values[-1]
    return FunctionSample(new_grid, values, f.label)


def stack(samples) -> np.ndarray:
    """Stack the ``values`` of a sequence of samples into an ``(n, T)`` array."""
    return np.vstack([s.values for s in samples])
