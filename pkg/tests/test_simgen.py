import numpy as np
import pytest

from elasticcp.errors import InvalidInputError
from elasticcp.functions import Grid
from elasticcp.simgen import (
    SimSpec,
    gen_amplitude_change,
    gen_null,
    gen_phase_change,
    gen_sensitivity,
    generate,
    phase_warp,
)
from elasticcp.warping import Warping


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        SimSpec("nope")
    with pytest.raises(InvalidInputError):
        SimSpec(n=10, changepoint=10)
    with pytest.raises(InvalidInputError):
        SimSpec(T=20)


@pytest.mark.parametrize("design", ["amplitude-change", "phase-change", "sensitivity", "null"])
def test_determinism(design):
    a = generate(SimSpec(design, rng_seed=11))
    b = generate(SimSpec(design, rng_seed=11))
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert len(a) == 75 and a[0].grid.num_points == 101


def test_amplitude_without_noise():
    fs = gen_amplitude_change(SimSpec(), z_sd=0.0, a_sd=0.0, change=False)
    t = fs[0].grid.original
    assert fs[0].grid.domain_min == -6 and fs[0].grid.domain_max == 6
    for f in fs:
        assert np.allclose(f.values, np.exp(-(t**2) / 2))


def test_amplitude_post_change_heights():
    spec = SimSpec(rng_seed=5)
    # a_sd = 0 keeps the peak at the grid point t = 0, so the maximum is z_i
    fs = gen_amplitude_change(spec, a_sd=0.0)
    after = np.array([f.values.max() for f in fs[spec.changepoint :]])
    assert abs(after.mean() - 1.5) <= 3 * 0.05 / np.sqrt(after.size)
    before = np.array([f.values.max() for f in fs[: spec.changepoint]])
    assert abs(before.mean() - 1.0) <= 3 * 0.05 / np.sqrt(before.size)


def test_phase_warp_formula():
    t = Grid(101, -3, 3).original
    g = phase_warp(t, 1.0)
    assert g[0] == -3 and g[-1] == 3
    assert g[50] == pytest.approx(6 * np.expm1(0.5) / np.expm1(1.0) - 3, abs=1e-12)
    assert g[50] == pytest.approx(-0.73476, abs=1e-5)
    assert np.array_equal(phase_warp(t, 0.0), t)
    for a in np.random.default_rng(0).uniform(-2, 2, 20):
        g = phase_warp(t, a)
        assert g[0] == -3.0 and g[-1] == 3.0


def test_phase_zero_warp_leaves_template():
    spec = SimSpec("phase-change")
    fs = gen_phase_change(spec, a_halfwidth=0.0, shift=0.0, z_sd=0.0)
    t = fs[0].grid.original
    y = np.exp(-((t - 1.5) ** 2) / 2) + np.exp(-((t + 1.5) ** 2) / 2)
    assert all(np.allclose(f.values, y) for f in fs)


def test_phase_warps_are_valid_on_unit_domain():
    grid = Grid(101, -3, 3)
    for a in np.random.default_rng(1).uniform(-1, 2, 10):
        Warping(grid, grid.to_unit(phase_warp(grid.original, a)))


def test_sensitivity_examples():
    spec = SimSpec("sensitivity")
    fs = gen_sensitivity(spec, coef_var=0.0, centers=([0, 0], [0, 0]), change=False)
    assert all(np.all(np.abs(f.values) < 1e-12) for f in fs)
    fs = gen_sensitivity(SimSpec("sensitivity", n=400, changepoint=399), centers=([1, 0], [0, 0]), change=False)
    t = fs[0].grid.t
    F = np.vstack([f.values for f in fs])
    se = F.std(axis=0, ddof=1) / np.sqrt(F.shape[0])
    assert np.all(np.abs(F.mean(axis=0) - np.cos(2 * np.pi * t)) <= 3 * se + 1e-12)
    noiseless = gen_sensitivity(spec, coef_var=0.0)
    assert all(f.values[0] == pytest.approx(f.values[-1], abs=1e-12) for f in noiseless)


def test_sensitivity_change_is_large_enough():
    for seed in range(20):
        spec = SimSpec("sensitivity", rng_seed=seed)
        fs = gen_sensitivity(spec, coef_var=0.0)
        assert not np.allclose(fs[0].values, fs[-1].values)


def test_null_designs():
    fs = gen_null(SimSpec("null", rng_seed=2), a_sd=0.0)
    peaks = np.array([f.values.max() for f in fs])
    assert abs(peaks.mean() - 1.0) <= 3 * 0.05 / np.sqrt(75)
    for base in ("phase-change", "sensitivity"):
        assert len(generate(SimSpec("null", null_base=base))) == 75
