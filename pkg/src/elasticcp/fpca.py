"""Vertical and horizontal functional PCA.

Samples are grid vectors; the covariance operator is diagonalized in the
trapezoid-weighted inner product, so eigenvalues approximate those of the
functional covariance operator and directions are orthonormal in L2. For
vertical fPCA the extra ``f(0)`` coordinate carries unit weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidInputError
from .functions import trapezoid_weights

EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class FixedComponents:
    """Keep at most ``d`` components."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError(f"number of components must be >= 1, got {self.d}")


@dataclass(frozen=True)
class VarianceFraction:
    """Keep the fewest components explaining at least ``fraction`` of the variance."""

    fraction: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise InvalidInputError(f"variance fraction must lie in (0, 1], got {self.fraction}")


Selector = Union[FixedComponents, VarianceFraction]


def parse_selector(text: str) -> Selector:
    """``"0.95"`` -> variance fraction, ``"3"`` -> fixed count."""
    value = float(text)
    if value.is_integer() and value >= 1:
        return FixedComponents(int(value))
    return VarianceFraction(value)


@dataclass(frozen=True)
class FpcaResult:
    """Principal directions (rows of ``directions``), eigenvalues and scores."""

    mean: np.ndarray
    directions: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    kind: str
    weights: np.ndarray
    all_eigenvalues: np.ndarray

    @property
    def num_components(self) -> int:
        return self.eigenvalues.size


def select_components(eigenvalues, selector: Selector) -> int:
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise InvalidInputError("no eigenvalues to select from")
    if isinstance(selector, (int, np.integer)):
        selector = FixedComponents(int(selector))
    elif isinstance(selector, float):
        selector = VarianceFraction(selector)
    if isinstance(selector, FixedComponents):
        return int(min(selector.d, np.count_nonzero(lam > EIG_FLOOR)))
    total = lam.sum()
    if total <= 0:
        return 0
    cum = np.cumsum(lam) / total
    # tolerate rounding in the cumulative sum
    return int(np.searchsorted(cum, selector.fraction - 1e-12) + 1)


def weighted_pca(X: np.ndarray, weights: np.ndarray, center: bool = True):
    """Eigen-decomposition of ``X^T X / (n-1)`` in the weighted inner product.

    Returns ``(mean, eigenvalues, directions)`` with eigenvalues descending,
    clamped at zero, and directions as rows orthonormal under ``weights``.
    Each direction's largest-magnitude coordinate is made positive.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("fPCA needs at least two samples")
    mean = X.mean(axis=0) if center else np.zeros(X.shape[1])
    Xc = X - mean
    root = np.sqrt(weights)
    Y = Xc * root
    cov = Y.T @ Y / (n - 1)
    lam, vecs = np.linalg.eigh(cov)
    order = np.argsort(lam)[::-1]
    lam = np.maximum(lam[order], 0.0)
    directions = (vecs[:, order] / root[:, None]).T
    for row in directions:
        k = np.argmax(np.abs(row))
        if row[k] < 0:
            row *= -1.0
    return mean, lam, directions


def _fpca(X, weights, selector, kind, center) -> FpcaResult:
    mean, lam, directions = weighted_pca(X, weights, center=center)
    p = select_components(lam, selector)
    Xc = X - mean
    scores = (Xc * weights) @ directions[:p].T
    return FpcaResult(
        mean=mean,
        directions=directions[:p],
        eigenvalues=lam[:p],
        scores=scores,
        kind=kind,
        weights=weights,
        all_eigenvalues=lam,
    )


def vertical_matrix(ar) -> np.ndarray:
    """Rows ``[aligned q_i, f_i(0)]`` of length ``T + 1``."""
    return np.column_stack([ar.aligned_matrix(), ar.f0()])


def vertical_fpca(ar, num_components: Selector = VarianceFraction(0.95)) -> FpcaResult:
    """fPCA of the aligned SRVFs augmented with the initial values ``f_i(0)``."""
    if ar.n < 2:
        raise InvalidInputError("vertical fPCA needs at least two functions")
    H = vertical_matrix(ar)
    T = ar.grid.num_points
    weights = np.concatenate([trapezoid_weights(T), [1.0]])
    return _fpca(H, weights, num_components, "vertical", center=True)


def horizontal_fpca(
    vs, num_components: Selector = VarianceFraction(0.95), center: bool = False
) -> FpcaResult:
    """fPCA of shooting vectors sharing one base point.

    The covariance uses the shooting vectors as they are (no mean removal)
    unless ``center`` is set.
    """
    vs = list(vs)
    if len(vs) < 2:
        raise InvalidInputError("horizontal fPCA needs at least two shooting vectors")
    base = vs[0].base.values
    for v in vs[1:]:
        if v.base is not vs[0].base and not np.array_equal(v.base.values, base):
            raise InvalidInputError("shooting vectors must share a base point")
    V = np.vstack([v.values for v in vs])
    weights = trapezoid_weights(V.shape[1])
    return _fpca(V, weights, num_components, "horizontal", center=center)
