import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstwobign

from elasticcp.changepoint import (
    LimitDistribution,
    TestConfig,
    amplitude_test_ff,
    amplitude_test_pca,
    cross_sectional_test,
    cross_sectional_test_pca,
    cusum_trace,
    first_argmax,
    p_value,
    pca_cusum_trace,
    phase_test_ff,
    phase_test_pca,
    run_method,
    simulate_limit_sup,
)
from elasticcp.errors import DegenerateDataError, InvalidInputError
from elasticcp.functions import FunctionSample
from elasticcp.karcher import karcher_mean_align
from elasticcp.simgen import SimSpec, generate
from elasticcp.warping import Warping

from conftest import peak_dataset

CFG = TestConfig(mc_reps=1000)


@pytest.fixture(scope="module")
def amplitude_data():
    fs = generate(SimSpec("amplitude-change", rng_seed=0))
    return fs, karcher_mean_align(fs)


@pytest.fixture(scope="module")
def phase_data():
    fs = generate(SimSpec("phase-change", rng_seed=0))
    return fs, karcher_mean_align(fs)


def test_config_validation():
    for bad in (dict(alpha=0), dict(alpha=1), dict(mc_reps=99), dict(mc_grid=100), dict(prefix_mode="x"), dict(limit_grid="x")):
        with pytest.raises(InvalidInputError):
            TestConfig(**bad)


def test_env_var_sets_default_reps(monkeypatch):
    monkeypatch.setenv("ELASTICCP_MC_REPS", "321")
    assert TestConfig().mc_reps == 321
    monkeypatch.delenv("ELASTICCP_MC_REPS")
    assert TestConfig().mc_reps == 10000


def test_scalar_toy_cusum():
    x = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=float)[:, None]
    trace = cusum_trace(x, np.ones(1))
    # S_k = (sum_{i<=k} x_i - k/2) / sqrt(8): -k/2 for k <= 4
    expected = np.array([-0.5, -1, -1.5, -2, -1.5, -1, -0.5, 0]) ** 2 / 8
    assert np.allclose(trace, expected)
    assert first_argmax(trace) == 4
    lam = np.var(x, ddof=1)
    pca = pca_cusum_trace(x, [lam])
    assert first_argmax(pca) == 4
    assert np.allclose(pca, expected / lam)


def test_first_argmax_breaks_ties_low():
    assert first_argmax(np.array([0.0, 2.0, 1.0, 2.0])) == 2


def test_pca_trace_is_sign_invariant():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(20, 3))
    flips = np.array([1.0, -1.0, -1.0])
    assert np.allclose(pca_cusum_trace(s, [1, 2, 3]), pca_cusum_trace(s * flips, [1, 2, 3]))


def test_limit_law_zero_and_scaling():
    zero = simulate_limit_sup([0.0], CFG)
    assert np.all(zero.draws == 0)
    one = simulate_limit_sup([1.0], CFG)
    three = simulate_limit_sup([3.0], CFG)
    assert np.allclose(three.draws, 3 * one.draws, rtol=1e-12)
    with pytest.raises(InvalidInputError):
        simulate_limit_sup([], CFG)
    with pytest.raises(InvalidInputError):
        simulate_limit_sup([-1.0], CFG)


def test_limit_law_matches_kolmogorov_quantile():
    dist = simulate_limit_sup([1.0], TestConfig(mc_reps=20000, rng_seed=3))
    assert dist.quantile(0.95) == pytest.approx(kstwobign.ppf(0.95) ** 2, rel=0.03)


def test_limit_law_is_reproducible():
    a = simulate_limit_sup([1.0, 0.5], CFG.with_(rng_seed=9))
    b = simulate_limit_sup([1.0, 0.5], CFG.with_(rng_seed=9))
    assert np.array_equal(a.draws, b.draws)


def test_sample_grid_law_is_below_continuous():
    sample = simulate_limit_sup([1.0], CFG, n=75)
    continuous = simulate_limit_sup([1.0], CFG.with_(limit_grid="continuous"), n=75)
    assert np.array_equal(continuous.draws, simulate_limit_sup([1.0], CFG).draws)
    assert sample.quantile(0.95) < continuous.quantile(0.95)


def test_sample_grid_size_on_gaussian_noise():
    rng = np.random.default_rng(11)
    dist = simulate_limit_sup([1.0], TestConfig(mc_reps=4000), n=75)
    rejections = 0
    for _ in range(1000):
        x = rng.normal(size=75)
        x -= x.mean()
        stat = pca_cusum_trace(x[:, None], [x.var(ddof=1)]).max()
        rejections += p_value(stat, dist) <= 0.05
    assert 0.035 <= rejections / 1000 <= 0.065


def test_p_value_examples():
    draws = np.sort(np.random.default_rng(0).exponential(size=999))
    dist = LimitDistribution(draws, np.ones(1))
    assert p_value(-1.0, dist) == 1.0
    assert p_value(draws[-1] + 1, dist) == 1 / 1000
    assert p_value(np.median(draws), dist) == pytest.approx(0.5, abs=2 / np.sqrt(999))


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 10))
def test_p_value_in_unit_interval(stat):
    dist = simulate_limit_sup([1.0], CFG)
    assert 0 < p_value(stat, dist) <= 1


def test_amplitude_ff_on_simulation(amplitude_data):
    fs, ar = amplitude_data
    r = amplitude_test_ff(fs, CFG, alignment=ar)
    assert r.k_star == 30
    assert r.p_value <= 0.01
    assert r.statistic == r.cusum_trace.max()
    assert abs(r.cusum_trace[-1]) <= 1e-10
    assert r.lambda2 == pytest.approx(r.cusum_trace.mean())
    assert r.mean_after.values.max() > r.mean_before.values.max()


def test_alignment_is_computed_when_missing():
    fs = peak_dataset(np.linspace(-1, 1, 6))
    r = amplitude_test_ff(fs, CFG)
    assert r.alignment is not None and r.alignment.n == 6


def test_amplitude_pca_on_simulation(amplitude_data):
    fs, ar = amplitude_data
    r = amplitude_test_pca(fs, CFG, alignment=ar)
    assert r.k_star == 30 and r.p_value <= 0.05
    assert r.num_components >= 1


def test_phase_tests_on_phase_simulation(phase_data):
    fs, ar = phase_data
    for test in (phase_test_ff, phase_test_pca):
        r = test(fs, CFG, alignment=ar)
        assert abs(r.k_star - 30) <= 2 and r.p_value <= 0.05
        assert abs(r.cusum_trace[-1]) <= 1e-10
        assert isinstance(r.mean_before, Warping) and isinstance(r.mean_after, Warping)
        assert np.allclose(r.delta_hat, r.mean_after.values - r.mean_before.values)


def test_cross_sectional_variants(amplitude_data):
    fs, _ = amplitude_data
    for test in (cross_sectional_test, cross_sectional_test_pca):
        r = test(fs, CFG)
        assert abs(r.cusum_trace[-1]) <= 1e-10
        assert 1 <= r.k_star < 75


def test_constant_dataset_is_degenerate():
    fs = peak_dataset([0.0] * 6)
    for test in (amplitude_test_ff, phase_test_ff):
        r = test(fs, CFG)
        assert r.statistic == 0 and r.p_value == 1 and r.k_star is None and r.degenerate
    r = cross_sectional_test(fs, CFG)
    assert r.statistic == 0 and r.degenerate
    for test in (amplitude_test_pca, phase_test_pca):
        with pytest.raises(DegenerateDataError):
            test(fs, CFG)


def test_too_few_functions():
    with pytest.raises(InvalidInputError):
        amplitude_test_ff(peak_dataset([0, 1, 2]), CFG)
    with pytest.raises(InvalidInputError):
        run_method("bogus", peak_dataset([0, 1, 2, 3]), CFG)


def test_scaling_keeps_k_star(amplitude_data):
    fs, _ = amplitude_data
    base = amplitude_test_ff(fs, CFG)
    scaled = amplitude_test_ff([FunctionSample(f.grid, 3.0 * f.values, f.label) for f in fs], CFG)
    assert scaled.k_star == base.k_star
    assert scaled.statistic == pytest.approx(3.0 * base.statistic, rel=0.02)


def test_reversal_mirrors_k_star(amplitude_data):
    fs, _ = amplitude_data
    r = amplitude_test_ff(fs[::-1], CFG)
    assert abs(r.k_star - (75 - 30)) <= 2


def test_lambda2_permutation_option(amplitude_data):
    fs, ar = amplitude_data
    r = amplitude_test_ff(fs, CFG.with_(lambda2_permutations=199), alignment=ar)
    assert r.lambda2_p_value == pytest.approx(1 / 200)
    assert amplitude_test_ff(fs, CFG, alignment=ar).lambda2_p_value is None


def test_realign_prefix_mode_runs():
    fs = generate(SimSpec("amplitude-change", n=8, changepoint=4, rng_seed=1))
    r = amplitude_test_ff(fs, CFG.with_(prefix_mode="realign"))
    assert abs(r.cusum_trace[-1]) <= 1e-8
    r = phase_test_ff(fs, CFG.with_(prefix_mode="realign"))
    assert abs(r.cusum_trace[-1]) <= 1e-6
