"""Square-root representation of warps and the geometry of the unit sphere.

A warp ``gamma`` maps to ``psi = sqrt(gamma')``, a point on the positive
orthant of the unit sphere in L2. Distances are arc lengths, and tangent
vectors at a base point ("shooting vectors") linearize a set of warps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError
from .functions import Grid, cumulative_integral, l2_inner, l2_norm, trapezoid_weights
from .warping import Warping, repair_monotone

SMALL_ANGLE = 1e-8
ANTIPODAL_MARGIN = 1e-6


@dataclass(frozen=True)
class PsiSample:
    """Unit-norm square-root derivative of a warp."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.num_points,):
            raise InvalidInputError("psi length does not match grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def norm(self) -> float:
        return l2_norm(self.values, self.grid)


@dataclass(frozen=True)
class ShootingVector:
    """Tangent vector ``v`` at ``base``: ``<v, base> = 0``."""

    grid: Grid
    values: np.ndarray
    base: PsiSample

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.num_points,):
            raise InvalidInputError("shooting vector length does not match grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def norm(self) -> float:
        return l2_norm(self.values, self.grid)


def _normalize(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return values / np.sqrt(np.dot(values * values, weights))


def psi_values(gamma: np.ndarray) -> np.ndarray:
    """Array form of :func:`to_psi`."""
    gamma = np.asarray(gamma, dtype=float)
    T = gamma.shape[-1]
    dgam = np.maximum(np.gradient(gamma, 1.0 / (T - 1), edge_order=1), 0.0)
    return _normalize(np.sqrt(dgam), trapezoid_weights(T))


def warp_values_from_psi(psi: np.ndarray) -> np.ndarray:
    """Array form of :func:`from_psi`."""
    gamma = cumulative_integral(np.asarray(psi, dtype=float) ** 2)
    return repair_monotone(gamma / gamma[-1])


def to_psi(gamma: Warping) -> PsiSample:
    """``psi = sqrt(gamma')``, renormalized to unit L2 norm."""
    return PsiSample(gamma.grid, psi_values(gamma.values))


def from_psi(psi: PsiSample) -> Warping:
    """``gamma(t) = int_0^t psi^2``, rescaled so that ``gamma(1) = 1``."""
    return Warping(psi.grid, warp_values_from_psi(psi.values))


def _angle(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> float:
    return float(np.arccos(np.clip(np.dot(a * b, weights), -1.0, 1.0)))


def phase_distance(g1: Warping, g2: Warping) -> float:
    """Arc length between the square-root representations of two warps."""
    w = trapezoid_weights(g1.grid.num_points)
    return _angle(psi_values(g1.values), psi_values(g2.values), w)


def exp_values(base: np.ndarray, v: np.ndarray, weights: np.ndarray) -> np.ndarray:
    nv = np.sqrt(max(np.dot(v * v, weights), 0.0))
    if nv == 0.0:
        return base.copy()
    out = np.cos(nv) * base + np.sin(nv) * v / nv
    return _normalize(out, weights)


def log_values(psi1: np.ndarray, base: np.ndarray, weights: np.ndarray) -> np.ndarray:
    inner = float(np.clip(np.dot(psi1 * base, weights), -1.0, 1.0))
    theta = np.arccos(inner)
    if theta >= np.pi - ANTIPODAL_MARGIN:
        raise DegenerateGeometryError("log map undefined for antipodal points")
    if theta < SMALL_ANGLE:
        # theta / sin(theta) -> 1
        return psi1 - inner * base
    return theta / np.sin(theta) * (psi1 - inner * base)


def exp_map(v: ShootingVector) -> PsiSample:
    """Exponential map at ``v.base``: ``cos|v| psi + sin|v| v/|v|``."""
    w = trapezoid_weights(v.grid.num_points)
    return PsiSample(v.grid, exp_values(v.base.values, v.values, w))


def log_map(psi1: PsiSample, base: PsiSample) -> ShootingVector:
    """Inverse exponential map of ``psi1`` at ``base``.

    Raises
    ------
    DegenerateGeometryError
        If the points are (numerically) antipodal.
    """
    w = trapezoid_weights(base.grid.num_points)
    return ShootingVector(base.grid, log_values(psi1.values, base.values, w), base)


def karcher_mean_psi(
    psis: np.ndarray, tol: float = 1e-6, max_iter: int = 100, step: float = 0.5
) -> tuple[np.ndarray, int, np.ndarray]:
    """Intrinsic mean of the rows of ``psis`` on the unit sphere.

    Returns ``(mean, iterations, objective_history)``.
    """
    psis = np.atleast_2d(np.asarray(psis, dtype=float))
    n, T = psis.shape
    w = trapezoid_weights(T)
    gram = np.clip((psis * w) @ psis.T, -1.0, 1.0)
    dist2 = np.arccos(gram) ** 2
    np.fill_diagonal(dist2, 0.0)
    mu = psis[int(np.argmin(dist2.sum(axis=1)))].copy()

    def objective(point):
        ang = np.arccos(np.clip((psis * w) @ point, -1.0, 1.0))
        return float(np.sum(ang**2))

    history = [objective(mu)]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        vbar = np.mean([log_values(p, mu, w) for p in psis], axis=0)
        if np.sqrt(np.dot(vbar * vbar, w)) < tol:
            break
        while True:
            candidate = exp_values(mu, step * vbar, w)
            value = objective(candidate)
            if value <= history[-1] or step < 1e-8:
                break
            step *= 0.5
        if value > history[-1]:
            break
        mu = candidate
        history.append(value)
    return mu, iterations, np.array(history)


def karcher_mean_warps(
    gs, tol: float = 1e-6, max_iter: int = 100
) -> tuple[Warping, PsiSample]:
    """Karcher mean of warps on the sphere of square-root derivatives.

    Starts from the sample point with the smallest sum of squared phase
    distances and takes damped steps (size 0.5, halved whenever the
    objective would increase) along the mean shooting vector.
    """
    gs = list(gs)
    if not gs:
        raise InvalidInputError("need at least one warp")
    grid = gs[0].grid
    psis = np.vstack([psi_values(g.values) for g in gs])
    mu, _, _ = karcher_mean_psi(psis, tol=tol, max_iter=max_iter)
    return Warping(grid, warp_values_from_psi(mu)), PsiSample(grid, mu)


def shooting_values(psis: np.ndarray, base: np.ndarray) -> np.ndarray:
    w = trapezoid_weights(base.size)
    return np.vstack([log_values(p, base, w) for p in np.atleast_2d(psis)])


def shooting_vectors(gs, base: PsiSample) -> list[ShootingVector]:
    """Log-map every warp into the tangent space at ``base``."""
    psis = np.vstack([psi_values(g.values) for g in gs])
    return [ShootingVector(base.grid, v, base) for v in shooting_values(psis, base.values)]


def tangent_inner(v: ShootingVector, psi: PsiSample) -> float:
    return l2_inner(v.values, psi.values, v.grid)
