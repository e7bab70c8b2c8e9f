import itertools

import numpy as np
import pytest

from elasticcp.functions import Grid, SrvfSample, l2_norm, srvf_transform
from elasticcp.karcher import AlignmentResult, align_srvfs, karcher_mean_align, prefix_means
from elasticcp.phase import karcher_mean_warps, phase_distance
from elasticcp.warping import Warping, group_action, optimal_warp, warp_function

from conftest import peak_dataset


@pytest.fixture(scope="module")
def peaks():
    fs = peak_dataset(np.linspace(-1, 1, 21))
    return fs, karcher_mean_align(fs)


def mean_pairwise(rows, grid):
    return np.mean([l2_norm(a - b, grid) for a, b in itertools.combinations(rows, 2)])


def test_single_function():
    fs = peak_dataset([0.3])
    ar = karcher_mean_align(fs)
    assert ar.iterations == 1 and ar.converged
    assert np.allclose(ar.mean_q.values, srvf_transform(fs[0]).values)
    assert np.array_equal(ar.warps[0].values, fs[0].grid.t)


def test_identical_functions():
    fs = peak_dataset([0.0] * 5)
    ar = karcher_mean_align(fs)
    assert np.allclose(ar.mean_q.values, srvf_transform(fs[0]).values, atol=1e-10)
    for g in ar.warps:
        assert np.max(np.abs(g.values - fs[0].grid.t)) <= 1e-6


def test_peaks_collapse(peaks):
    fs, ar = peaks
    grid = fs[0].grid
    before = mean_pairwise([f.values for f in fs], grid)
    after = mean_pairwise([f.values for f in ar.aligned_f], grid)
    assert after <= 0.1 * before


def test_aligned_q_is_group_action(peaks):
    fs, ar = peaks
    for f, g, q in zip(fs, ar.warps, ar.aligned_q):
        assert np.allclose(group_action(srvf_transform(f), g).values, q.values, atol=1e-12)


def test_objective_is_non_increasing(peaks):
    _, ar = peaks
    assert np.all(np.diff(ar.objective) <= 1e-8)


def test_warps_are_centered(peaks):
    _, ar = peaks
    mean, _ = karcher_mean_warps(ar.warps)
    assert phase_distance(mean, Warping.identity(mean.grid)) <= 1e-2


def test_prefix_means():
    grid = Grid(5)
    rows = np.array([[1.0, 2, 3, 4, 5], [3, 2, 1, 0, -1], [0, 0, 0, 0, 6]])
    mu, aligned, warps, *_ = align_srvfs(rows, max_iter=1, center=False)
    ar = AlignmentResult(
        mean_q=SrvfSample(grid, mu),
        aligned_q=tuple(SrvfSample(grid, r, f0) for r, f0 in zip(rows, [1.0, 2.0, 6.0])),
        warps=tuple(Warping(grid, w) for w in warps),
        aligned_f=(),
        iterations=1,
        converged=True,
        objective=np.zeros(1),
    )
    means = prefix_means(ar)
    assert np.array_equal(means[0].values, rows[0])
    assert np.array_equal(means[1].values, (rows[0] + rows[1]) / 2)
    assert np.allclose(means[2].values, rows.mean(axis=0), atol=1e-15)
    assert means[2].f0 == pytest.approx(3.0)


def test_last_prefix_mean_equals_mean(peaks):
    _, ar = peaks
    assert np.allclose(prefix_means(ar)[-1].values, ar.mean_q.values, atol=1e-8)


def test_permutation_leaves_mean_unchanged():
    fs = peak_dataset([-0.8, -0.1, 0.4, 0.9, 0.2])
    a = karcher_mean_align(fs)
    b = karcher_mean_align(fs[::-1])
    assert np.allclose(a.mean_q.values, b.mean_q.values, atol=1e-8)


def test_common_warp_barely_moves_mean():
    fs = peak_dataset([-0.8, -0.3, 0.2, 0.7])
    grid = fs[0].grid
    g = Warping(grid, np.expm1(0.8 * grid.t) / np.expm1(0.8))
    a = karcher_mean_align(fs).mean_q
    b = karcher_mean_align([warp_function(f, g) for f in fs]).mean_q
    d = min(optimal_warp(a, b)[1], optimal_warp(b, a)[1])
    assert d <= 1e-2 * l2_norm(a.values, grid)


def test_thread_count_does_not_change_result():
    fs = peak_dataset(np.linspace(-1.0, 1.0, 9))
    a = karcher_mean_align(fs, workers=1)
    b = karcher_mean_align(fs, workers=4)
    assert np.array_equal(a.warp_matrix(), b.warp_matrix())
    assert np.array_equal(a.mean_q.values, b.mean_q.values)
