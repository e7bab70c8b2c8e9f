"""Compiled kernels for lattice dynamic-programming registration.

The lattice is the ``T x T`` grid of node pairs ``(i, j)`` where ``i`` indexes
time for the template ``q1`` and ``j`` indexes the value ``gamma(t_i)``.
A path moves from ``(0, 0)`` to ``(T-1, T-1)`` using the steps in
:data:`NEIGHBORS`; between nodes the warp is linear.
"""

from math import gcd, sqrt

import numba
import numpy as np

MAX_STEP = 7


def neighbor_set(max_step: int = MAX_STEP) -> np.ndarray:
    """Steps ``(di, dj)`` with ``1 <= di, dj <= max_step`` and coprime entries."""
    steps = [
        (di, dj)
        for di in range(1, max_step + 1)
        for dj in range(1, max_step + 1)
        if gcd(di, dj) == 1
    ]
    return np.array(steps, dtype=np.int64)


NEIGHBORS = neighbor_set()


@numba.njit(cache=True, nogil=True)
def segment_cost(q1, q2, i, j, k, l):
    """Squared residual ``||q1 - (q2, gamma)||^2`` over ``[t_i, t_k]``.

    ``gamma`` is the line from ``(t_i, t_j)`` to ``(t_k, t_l)``; the integral is
    taken with the trapezoidal rule on the grid points inside the segment.
    """
    T = q1.shape[0]
    h = 1.0 / (T - 1)
    di = k - i
    slope = (l - j) / di
    root = sqrt(slope)
    total = 0.0
    for s in range(di + 1):
        x = s * slope
        x0 = j + int(x)
        if x0 >= T - 1:
            val = q2[T - 1]
        else:
            val = q2[x0] + (x - int(x)) * (q2[x0 + 1] - q2[x0])
        e = q1[i + s] - root * val
        if s == 0 or s == di:
            total += 0.5 * h * e * e
        else:
            total += h * e * e
    return total


@numba.njit(cache=True, nogil=True)
def dp_table(q1, q2, neighbors):
    """Fill the cost-to-come table; returns ``(energy, pred_i, pred_j)``.

    Edge costs are bit-identical to :func:`segment_cost`. Nodes outside the
    cone of slopes reachable from both corners are skipped.
    """
    T = q1.shape[0]
    h = 1.0 / (T - 1)
    nn = neighbors.shape[0]
    width = 0
    max_slope = 0.0
    for n in range(nn):
        width = max(width, neighbors[n, 0] + 1)
        max_slope = max(max_slope, neighbors[n, 1] / neighbors[n, 0])
    # sample positions j + s * slope split into integer and fractional parts,
    # computed the same way as in segment_cost
    offsets = np.zeros((nn, width), dtype=np.int64)
    fracs = np.zeros((nn, width))
    roots = np.empty(nn)
    for n in range(nn):
        slope = neighbors[n, 1] / neighbors[n, 0]
        roots[n] = sqrt(slope)
        for s in range(neighbors[n, 0] + 1):
            x = s * slope
            offsets[n, s] = int(x)
            fracs[n, s] = x - int(x)

    # weights h/2 at segment ends and h inside, as in segment_cost
    weights = np.empty((nn, width))
    for n in range(nn):
        for s in range(neighbors[n, 0] + 1):
            weights[n, s] = 0.5 * h if s == 0 or s == neighbors[n, 0] else h
    # the last sample sits exactly on a node, so a repeated final value
    # reproduces the end-point clamp of segment_cost
    q2p = np.empty(T + 1)
    q2p[:T] = q2
    q2p[T] = q2[T - 1]

    energy = np.full((T, T), np.inf)
    pred_i = np.full((T, T), -1, dtype=np.int64)
    pred_j = np.full((T, T), -1, dtype=np.int64)
    energy[0, 0] = 0.0
    end = T - 1
    for k in range(1, T):
        for l in range(1, T):
            if l > max_slope * k or k > max_slope * l:
                continue
            if end - l > max_slope * (end - k) or end - k > max_slope * (end - l):
                continue
            best = np.inf
            bi = -1
            bj = -1
            for n in range(nn):
                di = neighbors[n, 0]
                i = k - di
                j = l - neighbors[n, 1]
                if i < 0 or j < 0:
                    continue
                cand = energy[i, j]
                # edge costs are nonnegative, so this edge cannot improve on best
                if cand >= best:
                    continue
                root = roots[n]
                total = 0.0
                for s in range(di + 1):
                    x0 = j + offsets[n, s]
                    val = q2p[x0] + fracs[n, s] * (q2p[x0 + 1] - q2p[x0])
                    e = q1[i + s] - root * val
                    total += weights[n, s] * e * e
                cand += total
                if cand < best:
                    best = cand
                    bi = i
                    bj = j
            energy[k, l] = best
            pred_i[k, l] = bi
            pred_j[k, l] = bj
    return energy, pred_i, pred_j


@numba.njit(cache=True, nogil=True)
def backtrack(pred_i, pred_j):
    """Node sequence of the optimal path, from ``(0, 0)`` to ``(T-1, T-1)``."""
    T = pred_i.shape[0]
    path_i = np.empty(T, dtype=np.int64)
    path_j = np.empty(T, dtype=np.int64)
    k = T - 1
    l = T - 1
    count = 0
    while True:
        path_i[count] = k
        path_j[count] = l
        count += 1
        if k == 0 and l == 0:
            break
        k, l = pred_i[k, l], pred_j[k, l]
    return path_i[:count][::-1].copy(), path_j[:count][::-1].copy()


@numba.njit(cache=True, nogil=True)
def _interp_unit(q, x):
    T = q.shape[0]
    p = x * (T - 1)
    k = int(p)
    if k >= T - 1:
        return q[T - 1]
    return q[k] + (p - k) * (q[k + 1] - q[k])


@numba.njit(cache=True, nogil=True)
def _node_residual(q1, q2, g, m, h):
    """Weighted squared residual of the group action at grid node ``m``.

    Matches ``action_values``: linear interpolation of ``q2`` and a first-order
    (centered interior, one-sided boundary) derivative of ``g``.
    """
    T = g.shape[0]
    if m == 0:
        d = (g[1] - g[0]) / h
        w = 0.5 * h
    elif m == T - 1:
        d = (g[T - 1] - g[T - 2]) / h
        w = 0.5 * h
    else:
        d = (g[m + 1] - g[m - 1]) / (2.0 * h)
        w = h
    if d < 0.0:
        d = 0.0
    e = q1[m] - _interp_unit(q2, g[m]) * sqrt(d)
    return w * e * e


@numba.njit(cache=True, nogil=True)
def _local_cost(q1, q2, g, i, h):
    return (
        _node_residual(q1, q2, g, i - 1, h)
        + _node_residual(q1, q2, g, i, h)
        + _node_residual(q1, q2, g, i + 1, h)
    )


@numba.njit(cache=True, nogil=True)
def polish_warp(q1, q2, gamma, sweeps, golden_iters):
    """Derivative-free coordinate descent on interior warp values.

    Each interior value is moved by golden-section search inside the open
    interval spanned by its neighbours; a move is kept only if it lowers the
    local residual, so the evaluated registration cost never increases and
    the warp stays strictly increasing with fixed endpoints.
    """
    T = gamma.shape[0]
    h = 1.0 / (T - 1)
    g = gamma.copy()
    ratio = (sqrt(5.0) - 1.0) / 2.0
    for _ in range(sweeps):
        moved = False
        for i in range(1, T - 1):
            lo = g[i - 1]
            hi = g[i + 1]
            width = hi - lo
            a = lo + 1e-6 * width
            b = hi - 1e-6 * width
            orig = g[i]
            current = _local_cost(q1, q2, g, i, h)
            c = b - ratio * (b - a)
            d = a + ratio * (b - a)
            g[i] = c
            fc = _local_cost(q1, q2, g, i, h)
            g[i] = d
            fd = _local_cost(q1, q2, g, i, h)
            for _ in range(golden_iters):
                if fc < fd:
                    b = d
                    d = c
                    fd = fc
                    c = b - ratio * (b - a)
                    g[i] = c
                    fc = _local_cost(q1, q2, g, i, h)
                else:
                    a = c
                    c = d
                    fc = fd
                    d = a + ratio * (b - a)
                    g[i] = d
                    fd = _local_cost(q1, q2, g, i, h)
            if fc < fd:
                best, fbest = c, fc
            else:
                best, fbest = d, fd
            if fbest < current:
                g[i] = best
                moved = True
            else:
                g[i] = orig
        if not moved:
            break
    return g
