"""Seeded generators for the amplitude, phase, sensitivity and null designs.

All randomness comes from :func:`numpy.random.default_rng` (the PCG64
bit generator), so datasets are reproducible across platforms for a given
seed. Variance parameters are keyword arguments so tests can switch noise
off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .functions import FunctionSample, Grid

DESIGNS = ("amplitude-change", "phase-change", "sensitivity", "null")
PHASE_SHIFT = 1.0
MIN_SENSITIVITY_CHANGE = 0.5


@dataclass(frozen=True)
class SimSpec:
    """Simulation design. ``changepoint`` is the last pre-change index (1-based)."""

    design: str = "amplitude-change"
    n: int = 75
    changepoint: int = 30
    T: int = 101
    rng_seed: int = 0
    null_base: str = "amplitude-change"

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise InvalidInputError(f"unknown design {self.design!r}; choose from {DESIGNS}")
        if not 1 <= self.changepoint < self.n:
            raise InvalidInputError("changepoint must satisfy 1 <= changepoint < n")
        if self.T < 21:
            raise InvalidInputError("T must be at least 21")
        if self.null_base not in DESIGNS[:3]:
            raise InvalidInputError(f"null_base must be one of {DESIGNS[:3]}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


def _labelled(grid: Grid, rows) -> list[FunctionSample]:
    return [FunctionSample(grid, row, i + 1) for i, row in enumerate(rows)]


def gen_amplitude_change(
    spec: SimSpec,
    z_sd: float = 0.05,
    a_sd: float = 1.25,
    mean_after: float = 1.5,
    change: bool = True,
) -> list[FunctionSample]:
    """Gaussian peaks ``z_i exp(-(t - a_i)^2 / 2)`` on [-6, 6].

    ``z_i ~ N(1, z_sd^2)`` up to the changepoint and ``N(mean_after, z_sd^2)``
    afterwards; the peak locations ``a_i ~ N(0, a_sd^2)`` never change.
    """
    grid = Grid(spec.T, -6.0, 6.0)
    t = grid.original
    rng = spec.rng()
    means = np.where((np.arange(spec.n) >= spec.changepoint) & change, mean_after, 1.0)
    z = means + z_sd * rng.normal(0.0, 1.0, spec.n)
    a = rng.normal(0.0, 1.0, spec.n) * a_sd
    return _labelled(grid, z[:, None] * np.exp(-((t - a[:, None]) ** 2) / 2.0))


def phase_warp(t: np.ndarray, a: float) -> np.ndarray:
    """``6 (exp(a (t + 3) / 6) - 1) / (exp(a) - 1) - 3`` on [-3, 3]; identity for ``a = 0``."""
    t = np.asarray(t, dtype=float)
    if a == 0.0:
        return t.copy()
    out = 6.0 * np.expm1(a * (t + 3.0) / 6.0) / np.expm1(a) - 3.0
    out[0], out[-1] = t[0], t[-1]
    return out


def gen_phase_change(
    spec: SimSpec,
    z_sd: float = 0.25,
    a_halfwidth: float = 1.0,
    shift: float = PHASE_SHIFT,
    change: bool = True,
) -> list[FunctionSample]:
    """Two-peak functions on [-3, 3] composed with random exponential warps.

    ``y_i = z_{i1} exp(-(t - 1.5)^2/2) + z_{i2} exp(-(t + 1.5)^2/2)`` with
    ``z ~ N(1, z_sd^2)``; ``x_i = y_i o gamma_i`` where the warp parameter
    ``a_i ~ U(-a_halfwidth, a_halfwidth)``, moved by ``shift`` after the
    changepoint.
    """
    grid = Grid(spec.T, -3.0, 3.0)
    t = grid.original
    rng = spec.rng()
    z = 1.0 + z_sd * rng.normal(0.0, 1.0, (spec.n, 2))
    a = rng.uniform(-1.0, 1.0, spec.n) * a_halfwidth
    if change:
        a[spec.changepoint :] += shift
    rows = []
    for i in range(spec.n):
        s = phase_warp(t, a[i])
        rows.append(z[i, 0] * np.exp(-((s - 1.5) ** 2) / 2.0) + z[i, 1] * np.exp(-((s + 1.5) ** 2) / 2.0))
    return _labelled(grid, rows)


def _draw_centers(rng, low=-1.0, high=1.0):
    return rng.uniform(low, high, 2), rng.uniform(low, high, 2)


def gen_sensitivity(
    spec: SimSpec,
    coef_var: float = 0.08,
    centers: Optional[tuple] = None,
    centers_after: Optional[tuple] = None,
    change: bool = True,
) -> list[FunctionSample]:
    """Random two-frequency trigonometric curves on [0, 1].

    ``f = a_0 cos 2 pi t + b_0 sin 2 pi t + a_1 cos 4 pi t + b_1 sin 4 pi t``
    with ``a_i ~ N(a*, coef_var)`` and ``b_i ~ N(b*, coef_var)`` coordinate-wise.
    The centers ``a*, b*`` are drawn from U(-1, 1) and redrawn after the
    changepoint until their total absolute change is at least 0.5.
    """
    grid = Grid(spec.T, 0.0, 1.0)
    t = grid.original
    rng = spec.rng()
    a_star, b_star = centers if centers is not None else _draw_centers(rng)
    a_star, b_star = np.asarray(a_star, float), np.asarray(b_star, float)
    if not change:
        a_after, b_after = a_star, b_star
    elif centers_after is not None:
        a_after, b_after = (np.asarray(c, float) for c in centers_after)
    else:
        while True:
            a_after, b_after = _draw_centers(rng)
            if np.abs(a_after - a_star).sum() + np.abs(b_after - b_star).sum() >= MIN_SENSITIVITY_CHANGE:
                break
    after = np.arange(spec.n) >= spec.changepoint
    sd = np.sqrt(coef_var)
    a = np.where(after[:, None], a_after, a_star) + sd * rng.normal(0.0, 1.0, (spec.n, 2))
    b = np.where(after[:, None], b_after, b_star) + sd * rng.normal(0.0, 1.0, (spec.n, 2))
    basis_c = np.vstack([np.cos(2 * np.pi * t), np.cos(4 * np.pi * t)])
    basis_s = np.vstack([np.sin(2 * np.pi * t), np.sin(4 * np.pi * t)])
    return _labelled(grid, a @ basis_c + b @ basis_s)


def gen_null(spec: SimSpec, **kwargs) -> list[FunctionSample]:
    """The ``spec.null_base`` design with the change switched off."""
    return GENERATORS[spec.null_base](spec, change=False, **kwargs)


GENERATORS = {
    "amplitude-change": gen_amplitude_change,
    "phase-change": gen_phase_change,
    "sensitivity": gen_sensitivity,
}


def generate(spec: SimSpec, **kwargs) -> list[FunctionSample]:
    """Dispatch on ``spec.design``."""
    if spec.design == "null":
        return gen_null(spec, **kwargs)
    return GENERATORS[spec.design](spec, **kwargs)
