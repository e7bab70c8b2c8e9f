"""Karcher (elastic) mean of a set of functions and joint alignment."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .functions import FunctionSample, Grid, SrvfSample, srvf_values, trapezoid_weights
from .phase import karcher_mean_psi, psi_values, warp_values_from_psi
from .warping import (
    Warping,
    action_values,
    inverse_values,
    optimal_warp_values,
    repair_monotone,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 20


@dataclass(frozen=True)
class AlignmentResult:
    """Output of :func:`karcher_mean_align`.

    ``aligned_q[i]`` is ``group_action(q_i, warps[i])`` and ``aligned_f[i]``
    the corresponding warped function ``f_i o warps[i]``.
    """

    mean_q: SrvfSample
    aligned_q: tuple
    warps: tuple
    aligned_f: tuple
    iterations: int
    converged: bool
    objective: np.ndarray
    original: tuple = ()

    @property
    def grid(self) -> Grid:
        return self.mean_q.grid

    @property
    def n(self) -> int:
        return len(self.aligned_q)

    def aligned_matrix(self) -> np.ndarray:
        """Aligned SRVFs as an ``(n, T)`` array."""
        return np.vstack([q.values for q in self.aligned_q])

    def warp_matrix(self) -> np.ndarray:
        return np.vstack([g.values for g in self.warps])

    def f0(self) -> np.ndarray:
        return np.array([q.f0 for q in self.aligned_q])


def _sq_norms(diff: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return (diff * diff) @ weights


def _initial_index(Q: np.ndarray, weights: np.ndarray, init: str) -> int:
    n = Q.shape[0]
    if n == 1:
        return 0
    if init == "l2":
        gram = (Q * weights) @ Q.T
        sq = np.diag(gram)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
        scores = d2.sum(axis=1)
    elif init == "elastic":
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                dij = min(optimal_warp_values(Q[i], Q[j])[1], optimal_warp_values(Q[j], Q[i])[1])
                d[i, j] = d[j, i] = dij
        scores = d.sum(axis=1)
    else:
        raise InvalidInputError(f"unknown initializer {init!r}")
    # argmin returns the lowest index among ties
    return int(np.argmin(scores))


def _center(Q, warps, aligned, identity):
    """In place: ``gamma_i <- gamma_i o mu_gamma^{-1}`` and re-warp the SRVFs."""
    psis = np.vstack([psi_values(g) for g in warps])
    mu_psi, _, _ = karcher_mean_psi(psis)
    inverse = inverse_values(warp_values_from_psi(mu_psi))
    for i in range(Q.shape[0]):
        warps[i] = repair_monotone(np.interp(inverse, identity, warps[i]))
        aligned[i] = action_values(Q[i], warps[i])


def _default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def align_srvfs(
    Q: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init: str = "l2",
    center: bool = True,
    workers: int | None = None,
):
    """Array core of :func:`karcher_mean_align`.

    Parameters
    ----------
    Q : ndarray, shape (n, T)
        SRVFs to align.
    workers : int, optional
        Threads for the per-iteration registrations (default: available
        CPUs). Registrations are independent, so the result does not depend
        on this value.

    Returns
    -------
    mean : ndarray (T,)
    aligned : ndarray (n, T)
    warps : ndarray (n, T)
    iterations : int
    converged : bool
    history : ndarray
        Objective ``sum_i ||mean - (q_i, gamma_i)||^2`` per iteration, before centering.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n, T = Q.shape
    if n == 0:
        raise InvalidInputError("need at least one function")
    w = trapezoid_weights(T)
    identity = Grid(T).t

    if n == 1:
        return Q[0].copy(), Q.copy(), identity[None, :].copy(), 1, True, np.zeros(1)

    mu = Q[_initial_index(Q, w, init)].copy()
    warps = np.tile(identity, (n, 1))
    aligned = Q.copy()
    history = []
    converged = False
    iterations = 0
    workers = min(workers or _default_workers(), n)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for iterations in range(1, max_iter + 1):
            template = mu

            def register(q):
                return optimal_warp_values(template, q)[0]

            found = list(pool.map(register, Q)) if pool else [register(q) for q in Q]
            obj = _update(Q, found, mu, warps, aligned, w, keep_better=iterations > 1)
            history.append(obj)
            mu = aligned.mean(axis=0)
            if obj == 0.0:
                converged = True
                break
            if len(history) > 1 and (history[-2] - obj) <= tol * history[-2]:
                converged = True
                break
    finally:
        if pool:
            pool.shutdown()
    if not converged:
        log.warning("Karcher mean did not converge in %d iterations", max_iter)

    if center and n > 1:
        _center(Q, warps, aligned, identity)
        mu = aligned.mean(axis=0)
    return mu, aligned, warps, iterations, converged, np.array(history)


def _update(Q, found, mu, warps, aligned, w, keep_better) -> float:
    """Install the new warps in place and return the objective at ``mu``."""
    for i, gam in enumerate(found):
        cand = action_values(Q[i], gam)
        if keep_better:
            # keep the previous warp if registration to the new template is no better
            old_cost = np.dot((mu - aligned[i]) ** 2, w)
            if np.dot((mu - cand) ** 2, w) > old_cost:
                continue
        warps[i] = gam
        aligned[i] = cand
    return float(np.sum(_sq_norms(mu - aligned, w)))


def karcher_mean_align(
    fs: Sequence[FunctionSample],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init: str = "l2",
    center: bool = True,
    workers: int | None = None,
) -> AlignmentResult:
    """Jointly align functions to their elastic (Karcher) amplitude mean.

    Each iteration registers every SRVF to the current template and replaces
    the template by the average of the registered SRVFs. Iteration stops
    when the objective ``sum_i d_a(mu, q_i)^2`` decreases by less than ``tol``
    relative to its previous value. The warps are then centered so that
    their own Karcher mean is the identity.

    Parameters
    ----------
    init : {"l2", "elastic"}
        Choice of starting template: the SRVF with the smallest summed
        squared L2 distance to the others, or (quadratically many
        registrations) the smallest summed elastic distance.
    workers : int, optional
        Threads used for the registrations of each iteration; the default
        uses every available CPU. The result does not depend on it.
    """
    fs = list(fs)
    if not fs:
        raise InvalidInputError("need at least one function")
    grid = fs[0].grid
    for f in fs:
        if f.grid.num_points != grid.num_points:
            raise InvalidInputError("all functions must share a grid")
    F = np.vstack([f.values for f in fs])
    Q = srvf_values(F)
    mu, aligned, warps, iterations, converged, history = align_srvfs(
        Q, tol=tol, max_iter=max_iter, init=init, center=center, workers=workers
    )
    f0 = F[:, 0]
    aligned_q = tuple(SrvfSample(grid, aligned[i], f0[i]) for i in range(len(fs)))
    warp_objs = tuple(Warping(grid, warps[i]) for i in range(len(fs)))
    aligned_f = tuple(
        FunctionSample(grid, np.interp(warps[i], grid.t, F[i]), fs[i].label)
        for i in range(len(fs))
    )
    return AlignmentResult(
        mean_q=SrvfSample(grid, mu, float(np.mean(f0))),
        aligned_q=aligned_q,
        warps=warp_objs,
        aligned_f=aligned_f,
        iterations=iterations,
        converged=converged,
        objective=history,
        original=tuple(fs),
    )


def prefix_means(ar: AlignmentResult) -> list[SrvfSample]:
    """Running means ``mu^k = (1/k) sum_{i<=k} aligned_q[i]`` for ``k = 1..n``."""
    A = ar.aligned_matrix()
    f0 = ar.f0()
    counts = np.arange(1, A.shape[0] + 1)
    means = np.cumsum(A, axis=0) / counts[:, None]
    f0_means = np.cumsum(f0) / counts
    return [SrvfSample(ar.grid, means[k], f0_means[k]) for k in range(A.shape[0])]


def prefix_means_realigned(
    fs: Sequence[FunctionSample], tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> list[SrvfSample]:
    """Per-prefix Karcher means, re-solving the alignment for every ``k``.

    Costs ``n`` full alignments; intended for small ``n``.
    """
    fs = list(fs)
    return [karcher_mean_align(fs[:k], tol=tol, max_iter=max_iter).mean_q for k in range(1, len(fs) + 1)]
