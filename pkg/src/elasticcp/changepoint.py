"""Elastic CUSUM changepoint tests for amplitude and phase.

Four elastic tests are provided (fully functional and fPCA-based, for
amplitude and for phase) plus the cross-sectional baseline that ignores
phase. Fully functional statistics are calibrated against the supremum of a
weighted sum of squared Brownian bridges, simulated by Monte Carlo.
"""

from __future__ import annotations

import os
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidInputError
from .fpca import (
    EIG_FLOOR,
    Selector,
    VarianceFraction,
    horizontal_fpca,
    select_components,
    vertical_fpca,
    weighted_pca,
)
from .functions import FunctionSample, Grid, SrvfSample, srvf_inverse, trapezoid_weights
from .karcher import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    AlignmentResult,
    karcher_mean_align,
    prefix_means_realigned,
)
from .phase import (
    PsiSample,
    ShootingVector,
    exp_values,
    karcher_mean_psi,
    log_values,
    psi_values,
    shooting_values,
    warp_values_from_psi,
)
from .warping import Warping

MC_REPS_ENV = "ELASTICCP_MC_REPS"
DEGENERATE_VARIANCE = 1e-12
# -zeta(1/2) / sqrt(2 pi): shift of a continuously monitored maximum
# relative to a discretely monitored one (Broadie, Glasserman and Kou)
BGK_BETA = 0.5825971579390106
MIN_SAMPLES = 4


def default_mc_reps() -> int:
    value = os.environ.get(MC_REPS_ENV)
    return int(value) if value else 10000


@dataclass(frozen=True)
class TestConfig:
    """Settings shared by all tests.

    ``prefix_mode`` selects how the prefix means entering the CUSUM are
    formed: ``"global"`` reuses the single alignment of all ``n``
    functions, ``"realign"`` re-solves the Karcher mean for each prefix.

    ``limit_grid`` selects where the simulated bridges are monitored when a
    test computes its p-value. ``"sample"`` evaluates them at the points
    ``k/n`` on which the statistic itself is maximized, which is the exact
    law of the CUSUM of Gaussian data with known covariance.
    ``"continuous"`` uses ``mc_grid`` points plus the continuity correction
    and approximates the supremum over all of [0, 1]; at moderate ``n`` it
    is conservative.
    """

    __test__ = False  # not a pytest class

    alpha: float = 0.05
    mc_reps: int = field(default_factory=default_mc_reps)
    mc_grid: int = 1001
    component_selector: Selector = VarianceFraction(0.95)
    eigen_truncation: int = 50
    rng_seed: int = 0
    karcher_tol: float = DEFAULT_TOL
    karcher_max_iter: int = DEFAULT_MAX_ITER
    prefix_mode: str = "global"
    continuity_correction: bool = True
    lambda2_permutations: int = 0
    limit_grid: str = "sample"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mc_reps < 100:
            raise InvalidInputError(f"mc_reps must be >= 100, got {self.mc_reps}")
        if self.mc_grid < 101:
            raise InvalidInputError(f"mc_grid must be >= 101, got {self.mc_grid}")
        if self.eigen_truncation < 1:
            raise InvalidInputError("eigen_truncation must be positive")
        if self.prefix_mode not in ("global", "realign"):
            raise InvalidInputError(f"unknown prefix_mode {self.prefix_mode!r}")
        if self.limit_grid not in ("sample", "continuous"):
            raise InvalidInputError(f"unknown limit_grid {self.limit_grid!r}")
        if self.lambda2_permutations < 0:
            raise InvalidInputError("lambda2_permutations must be nonnegative")

    def with_(self, **changes) -> "TestConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class LimitDistribution:
    """Sorted Monte-Carlo draws of ``sup_x sum_l lambda_l B_l(x)^2``."""

    draws: np.ndarray
    eigenvalues: np.ndarray

    def quantile(self, prob) -> np.ndarray:
        return np.quantile(self.draws, prob)

    @property
    def size(self) -> int:
        return self.draws.size


@dataclass(frozen=True)
class ChangepointResult:
    """Outcome of a changepoint test.

    ``k_star`` is the 1-based index of the last observation before the
    change (``None`` for degenerate data). For phase tests ``mean_before``
    and ``mean_after`` are :class:`Warping` objects and ``delta_hat`` is the
    difference of their values; otherwise they are functions.
    """

    method: str
    statistic: float
    k_star: Optional[int]
    p_value: float
    lambda2: float
    cusum_trace: np.ndarray
    mean_before: object = None
    mean_after: object = None
    delta_hat: object = None
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    num_components: Optional[int] = None
    lambda2_p_value: Optional[float] = None
    converged: bool = True
    degenerate: bool = False
    alignment: Optional[AlignmentResult] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.cusum_trace.size

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha


# ---------------------------------------------------------------------------
# limit distribution


_BRIDGE_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_BRIDGE_CACHE_MAX_ELEMENTS = 60_000_000
_CHUNK = 100


def _bridge_chunks(seed: int, reps: int, grid: int, num: int):
    """Yield float32 arrays ``(chunk, num, grid)`` of discrete Brownian bridges.

    Each bridge is a Gaussian random walk ``W`` on ``grid`` equispaced points
    of [0, 1] with ``B(x) = W(x) - x W(1)``.
    """
    key = (seed, reps, grid, num)
    cached = _BRIDGE_CACHE.get(key)
    if cached is not None:
        for start in range(0, reps, _CHUNK):
            yield cached[start : start + _CHUNK]
        return
    cacheable = reps * grid * num <= _BRIDGE_CACHE_MAX_ELEMENTS
    store = np.empty((reps, num, grid), dtype=np.float32) if cacheable else None
    rng = np.random.default_rng(np.random.SeedSequence([seed, num, grid]))
    x = np.linspace(0.0, 1.0, grid)
    scale = np.sqrt(1.0 / (grid - 1))
    for start in range(0, reps, _CHUNK):
        c = min(_CHUNK, reps - start)
        steps = rng.standard_normal((c, num, grid - 1)) * scale
        walk = np.zeros((c, num, grid))
        np.cumsum(steps, axis=2, out=walk[:, :, 1:])
        bridge = (walk - x * walk[:, :, -1:]).astype(np.float32)
        if store is not None:
            store[start : start + c] = bridge
        yield bridge
    if store is not None:
        _BRIDGE_CACHE.clear()
        _BRIDGE_CACHE[key] = store


def simulate_limit_sup(
    eigs: Sequence[float], cfg: TestConfig, n: Optional[int] = None
) -> LimitDistribution:
    """Draws of ``sup_{0<=x<=1} sum_l lambda_l B_l(x)^2`` for independent bridges ``B_l``.

    Only the ``cfg.eigen_truncation`` largest eigenvalues are used. With
    ``cfg.continuity_correction`` each discrete maximum ``M`` attained at
    grid point ``x*`` is shifted to ``M + beta * sigma * sqrt(dx)``, where
    ``sigma = 2 sqrt(sum_l lambda_l^2 B_l(x*)^2)`` is the local diffusion
    coefficient of the process; this removes the leading-order bias of
    monitoring the supremum on a grid.

    Parameters
    ----------
    n : int, optional
        Sample size of the statistic being calibrated. When given and
        ``cfg.limit_grid == "sample"`` the supremum is taken over
        ``x = k/n`` only, without continuity correction.
    """
    lam = np.sort(np.asarray(eigs, dtype=float).ravel())[::-1]
    if lam.size == 0:
        raise InvalidInputError("need at least one eigenvalue")
    if np.any(lam < -1e-10):
        raise InvalidInputError("eigenvalues must be nonnegative")
    lam = np.maximum(lam[: cfg.eigen_truncation], 0.0)
    num = lam.size
    on_sample = n is not None and cfg.limit_grid == "sample"
    points = n + 1 if on_sample else cfg.mc_grid
    correct = cfg.continuity_correction and not on_sample
    dx = 1.0 / (points - 1)
    lam32 = lam.astype(np.float64)
    draws = np.empty(cfg.mc_reps)
    pos = 0
    for bridges in _bridge_chunks(cfg.rng_seed, cfg.mc_reps, points, num):
        b = bridges.astype(np.float64)
        proc = np.einsum("l,clm->cm", lam32, b * b)
        idx = np.argmax(proc, axis=1)
        sup = proc[np.arange(proc.shape[0]), idx]
        if correct:
            at_max = b[np.arange(b.shape[0]), :, idx]
            sigma = 2.0 * np.sqrt(np.einsum("l,cl->c", lam32**2, at_max * at_max))
            sup = sup + BGK_BETA * sigma * np.sqrt(dx)
        draws[pos : pos + sup.size] = sup
        pos += sup.size
    return LimitDistribution(np.sort(draws), lam)


_UNIT_CACHE: "OrderedDict[tuple, LimitDistribution]" = OrderedDict()


def _unit_limit(d: int, cfg: TestConfig, n: Optional[int] = None) -> LimitDistribution:
    """Limit law with ``d`` unit eigenvalues, memoized per configuration."""
    key = (d, n, cfg.rng_seed, cfg.mc_reps, cfg.mc_grid, cfg.continuity_correction, cfg.limit_grid)
    if key not in _UNIT_CACHE:
        _UNIT_CACHE[key] = simulate_limit_sup(np.ones(d), cfg.with_(eigen_truncation=max(d, 1)), n)
        if len(_UNIT_CACHE) > 64:
            _UNIT_CACHE.popitem(last=False)
    return _UNIT_CACHE[key]


def p_value(statistic: float, dist: LimitDistribution) -> float:
    """Monte-Carlo p-value ``(1 + #{draws >= statistic}) / (reps + 1)``."""
    if dist.size == 0:
        raise InvalidInputError("empty limit distribution")
    exceed = dist.size - np.searchsorted(dist.draws, statistic, side="left")
    return float((1 + exceed) / (dist.size + 1))


# ---------------------------------------------------------------------------
# CUSUM machinery


def cusum_from_prefix(prefix: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``||S_{n,k}||^2`` with ``S_{n,k} = k (mu^k - mu^n) / sqrt(n)``.

    ``prefix[k-1]`` holds the prefix mean ``mu^k``.
    """
    n = prefix.shape[0]
    k = np.arange(1, n + 1)[:, None]
    S = k * (prefix - prefix[-1]) / np.sqrt(n)
    return (S * S) @ weights


def cusum_trace(X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """CUSUM norms of the running means of the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    prefix = np.cumsum(X, axis=0) / np.arange(1, X.shape[0] + 1)[:, None]
    return cusum_from_prefix(prefix, weights)


def pca_cusum_trace(scores: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """``T_N(k/N)`` for ``k = 1..N`` from scores and their eigenvalues."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    N = scores.shape[0]
    x = np.arange(1, N + 1)[:, None] / N
    partial = np.cumsum(scores, axis=0) - x * scores.sum(axis=0)
    return (partial**2 / np.asarray(eigenvalues, dtype=float)).sum(axis=1) / N


def first_argmax(trace: np.ndarray) -> int:
    """1-based index of the first maximum."""
    return int(np.argmax(trace)) + 1


def _total_variance(X: np.ndarray, weights: np.ndarray) -> float:
    Xc = X - X.mean(axis=0)
    return float(((Xc * Xc) @ weights).sum() / max(X.shape[0] - 1, 1))


def _lambda2_permutation(X, weights, observed, cfg) -> Optional[float]:
    if cfg.lambda2_permutations <= 0:
        return None
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 2]))
    count = 0
    for _ in range(cfg.lambda2_permutations):
        perm = rng.permutation(X.shape[0])
        if cusum_trace(X[perm], weights).mean() >= observed:
            count += 1
    return (1 + count) / (cfg.lambda2_permutations + 1)


def _check_samples(fs) -> list:
    fs = list(fs)
    if len(fs) < MIN_SAMPLES:
        raise InvalidInputError(f"need at least {MIN_SAMPLES} functions, got {len(fs)}")
    T = fs[0].grid.num_points
    if any(f.grid.num_points != T for f in fs):
        raise InvalidInputError("all functions must share a grid")
    return fs


def _align(fs, cfg: TestConfig, alignment: Optional[AlignmentResult]) -> AlignmentResult:
    if alignment is not None:
        if alignment.n != len(fs):
            raise InvalidInputError("alignment does not match the number of functions")
        return alignment
    return karcher_mean_align(fs, tol=cfg.karcher_tol, max_iter=cfg.karcher_max_iter)


def _degenerate(method, n, lambda2=0.0, converged=True, alignment=None) -> ChangepointResult:
    return ChangepointResult(
        method=method,
        statistic=0.0,
        k_star=None,
        p_value=1.0,
        lambda2=lambda2,
        cusum_trace=np.zeros(n),
        converged=converged,
        degenerate=True,
        alignment=alignment,
    )


def _function_means(A: np.ndarray, f0: np.ndarray, grid: Grid, k: int):
    before = SrvfSample(grid, A[:k].mean(axis=0), f0[:k].mean())
    after = SrvfSample(grid, A[k:].mean(axis=0), f0[k:].mean())
    delta = SrvfSample(grid, after.values - before.values, after.f0 - before.f0)
    return srvf_inverse(before, "before"), srvf_inverse(after, "after"), srvf_inverse(delta, "delta")


def _warp_means(V: np.ndarray, base: np.ndarray, grid: Grid, k: int):
    w = trapezoid_weights(grid.num_points)
    before = Warping(grid, warp_values_from_psi(exp_values(base, V[:k].mean(axis=0), w)))
    after = Warping(grid, warp_values_from_psi(exp_values(base, V[k:].mean(axis=0), w)))
    return before, after, after.values - before.values


def _ff_result(method, X, weights, prefix, cfg, means, **extra) -> ChangepointResult:
    trace = cusum_from_prefix(prefix, weights)
    statistic = float(trace.max())
    k_star = first_argmax(trace)
    _, lam, _ = weighted_pca(X, weights, center=True)
    lam = lam[: cfg.eigen_truncation]
    dist = simulate_limit_sup(lam, cfg, X.shape[0])
    lambda2 = float(trace.mean())
    before, after, delta = means(k_star)
    return ChangepointResult(
        method=method,
        statistic=statistic,
        k_star=k_star,
        p_value=p_value(statistic, dist),
        lambda2=lambda2,
        cusum_trace=trace,
        mean_before=before,
        mean_after=after,
        delta_hat=delta,
        eigenvalues=lam,
        lambda2_p_value=_lambda2_permutation(X, weights, lambda2, cfg),
        **extra,
    )


def _pca_result(method, scores, eigenvalues, X, weights, cfg, means, **extra):
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0 or np.all(lam < EIG_FLOOR):
        raise DegenerateDataError("all fPCA eigenvalues vanish; no variability to test")
    keep = lam >= EIG_FLOOR
    lam = lam[keep]
    scores = np.atleast_2d(scores)[:, keep]
    trace = pca_cusum_trace(scores, lam)
    statistic = float(trace.max())
    k_star = first_argmax(trace)
    dist = _unit_limit(lam.size, cfg, scores.shape[0])
    lambda2 = float(cusum_trace(X, weights).mean())
    before, after, delta = means(k_star)
    return ChangepointResult(
        method=method,
        statistic=statistic,
        k_star=k_star,
        p_value=p_value(statistic, dist),
        lambda2=lambda2,
        cusum_trace=trace,
        mean_before=before,
        mean_after=after,
        delta_hat=delta,
        eigenvalues=lam,
        num_components=int(lam.size),
        lambda2_p_value=_lambda2_permutation(X, weights, lambda2, cfg),
        **extra,
    )


# ---------------------------------------------------------------------------
# amplitude


def amplitude_test_ff(
    fs: Sequence[FunctionSample],
    cfg: Optional[TestConfig] = None,
    alignment: Optional[AlignmentResult] = None,
) -> ChangepointResult:
    """Fully functional CUSUM test for a change in the elastic amplitude mean.

    ``alignment`` may carry a precomputed :func:`karcher_mean_align` result
    for the same functions, so that several tests can share one alignment.
    """
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    ar = _align(fs, cfg, alignment)
    A = ar.aligned_matrix()
    f0 = ar.f0()
    w = trapezoid_weights(ar.grid.num_points)
    if _total_variance(A, w) < DEGENERATE_VARIANCE:
        return _degenerate("elastic-amp", ar.n, converged=ar.converged, alignment=ar)
    if cfg.prefix_mode == "realign":
        prefix = np.vstack([m.values for m in prefix_means_realigned(fs, cfg.karcher_tol, cfg.karcher_max_iter)])
    else:
        prefix = np.cumsum(A, axis=0) / np.arange(1, ar.n + 1)[:, None]
    return _ff_result(
        "elastic-amp",
        A,
        w,
        prefix,
        cfg,
        lambda k: _function_means(A, f0, ar.grid, k),
        converged=ar.converged,
        alignment=ar,
    )


def amplitude_test_pca(
    fs: Sequence[FunctionSample],
    cfg: Optional[TestConfig] = None,
    alignment: Optional[AlignmentResult] = None,
) -> ChangepointResult:
    """fPCA-based test on vertical principal scores of the aligned functions.

    Raises
    ------
    DegenerateDataError
        If every vertical fPCA eigenvalue vanishes.
    """
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    ar = _align(fs, cfg, alignment)
    fp = vertical_fpca(ar, cfg.component_selector)
    A = ar.aligned_matrix()
    f0 = ar.f0()
    w = trapezoid_weights(ar.grid.num_points)
    return _pca_result(
        "elastic-amp-pca",
        fp.scores,
        fp.eigenvalues,
        A,
        w,
        cfg,
        lambda k: _function_means(A, f0, ar.grid, k),
        converged=ar.converged,
        alignment=ar,
    )


# ---------------------------------------------------------------------------
# phase


def _phase_representation(ar: AlignmentResult):
    psis = np.vstack([psi_values(g.values) for g in ar.warps])
    base, _, _ = karcher_mean_psi(psis)
    return psis, base, shooting_values(psis, base)


def phase_test_ff(
    fs: Sequence[FunctionSample],
    cfg: Optional[TestConfig] = None,
    alignment: Optional[AlignmentResult] = None,
) -> ChangepointResult:
    """Fully functional CUSUM test on shooting vectors of the warps.

    All shooting vectors live in the tangent space at the Karcher mean of
    the ``n`` warps.
    """
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    ar = _align(fs, cfg, alignment)
    psis, base, V = _phase_representation(ar)
    w = trapezoid_weights(ar.grid.num_points)
    if _total_variance(V, w) < DEGENERATE_VARIANCE:
        return _degenerate("elastic-phase", ar.n, converged=ar.converged, alignment=ar)
    if cfg.prefix_mode == "realign":
        prefix = np.vstack(
            [log_values(karcher_mean_psi(psis[:k])[0], base, w) for k in range(1, ar.n + 1)]
        )
    else:
        prefix = np.cumsum(V, axis=0) / np.arange(1, ar.n + 1)[:, None]
    return _ff_result(
        "elastic-phase",
        V,
        w,
        prefix,
        cfg,
        lambda k: _warp_means(V, base, ar.grid, k),
        converged=ar.converged,
        alignment=ar,
    )


def phase_test_pca(
    fs: Sequence[FunctionSample],
    cfg: Optional[TestConfig] = None,
    alignment: Optional[AlignmentResult] = None,
) -> ChangepointResult:
    """fPCA-based test on horizontal principal scores of the shooting vectors."""
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    ar = _align(fs, cfg, alignment)
    _, base, V = _phase_representation(ar)
    grid = ar.grid
    base_psi = PsiSample(grid, base)
    fp = horizontal_fpca([ShootingVector(grid, v, base_psi) for v in V], cfg.component_selector)
    w = trapezoid_weights(grid.num_points)
    return _pca_result(
        "elastic-phase-pca",
        fp.scores,
        fp.eigenvalues,
        V,
        w,
        cfg,
        lambda k: _warp_means(V, base, grid, k),
        converged=ar.converged,
        alignment=ar,
    )


# ---------------------------------------------------------------------------
# cross-sectional baseline


def _raw_means(F: np.ndarray, grid: Grid, k: int):
    before = FunctionSample(grid, F[:k].mean(axis=0), "before")
    after = FunctionSample(grid, F[k:].mean(axis=0), "after")
    return before, after, FunctionSample(grid, after.values - before.values, "delta")


def cross_sectional_test(
    fs: Sequence[FunctionSample], cfg: Optional[TestConfig] = None
) -> ChangepointResult:
    """Fully functional CUSUM test on the raw function values (no alignment)."""
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    F = np.vstack([f.values for f in fs])
    grid = fs[0].grid
    w = trapezoid_weights(grid.num_points)
    if _total_variance(F, w) < DEGENERATE_VARIANCE:
        return _degenerate("cross-sectional", len(fs))
    prefix = np.cumsum(F, axis=0) / np.arange(1, len(fs) + 1)[:, None]
    return _ff_result("cross-sectional", F, w, prefix, cfg, lambda k: _raw_means(F, grid, k))


def cross_sectional_test_pca(
    fs: Sequence[FunctionSample], cfg: Optional[TestConfig] = None
) -> ChangepointResult:
    """fPCA-based CUSUM test on the raw function values (no alignment)."""
    cfg = cfg or TestConfig()
    fs = _check_samples(fs)
    F = np.vstack([f.values for f in fs])
    grid = fs[0].grid
    w = trapezoid_weights(grid.num_points)
    mean, lam, directions = weighted_pca(F, w, center=True)
    p = select_components(lam, cfg.component_selector)
    scores = ((F - mean) * w) @ directions[:p].T
    return _pca_result(
        "cross-sectional-pca", scores, lam[:p], F, w, cfg, lambda k: _raw_means(F, grid, k)
    )


METHODS = {
    "elastic-amp": amplitude_test_ff,
    "elastic-phase": phase_test_ff,
    "elastic-amp-pca": amplitude_test_pca,
    "elastic-phase-pca": phase_test_pca,
    "cross-sectional": cross_sectional_test,
    "cross-sectional-pca": cross_sectional_test_pca,
}

ELASTIC_METHODS = ("elastic-amp", "elastic-phase", "elastic-amp-pca", "elastic-phase-pca")


def run_method(
    method: str,
    fs: Sequence[FunctionSample],
    cfg: Optional[TestConfig] = None,
    alignment: Optional[AlignmentResult] = None,
) -> ChangepointResult:
    """Dispatch by method name; elastic methods accept a shared ``alignment``."""
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    if method in ELASTIC_METHODS:
        return METHODS[method](fs, cfg, alignment=alignment)
    return METHODS[method](fs, cfg)
