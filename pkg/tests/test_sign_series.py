import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from signtensor.fit import FitConfig
from signtensor.sign_series import (
    CACHE_ENV, aggregate_signs, auto_H, estimate, level_seed, sign_series_of, trivial_sign,
)
from signtensor.tensor_core import SampleSet, draw_samples, SamplingDistribution, mae

unit = st.floats(-1, 1, allow_nan=False)


def test_aggregate_signs_examples():
    a = np.ones((2, 2))
    np.testing.assert_array_equal(aggregate_signs([a, -a]), 0.0)
    np.testing.assert_array_equal(aggregate_signs([a, a, -a, a]), 0.5)
    with pytest.raises(ValueError):
        aggregate_signs([])
    with pytest.raises(ValueError):
        aggregate_signs([a, np.ones((2, 3))])
    with pytest.raises(ValueError):
        aggregate_signs([np.zeros((2, 2))])


def test_sign_series_of_examples():
    # levels -1, -0.9, ..., 1: 0.3 lies above 14 of 21 levels
    assert sign_series_of(np.array([[0.3]]), 10)[0, 0] == pytest.approx(1 / 3)
    np.testing.assert_allclose(sign_series_of(np.array([[-1.0, 1.0]]), 4), [[-1 + 2 / 9, 1.0]])


@given(hnp.arrays(float, (3, 4), elements=unit), st.integers(1, 64))
def test_sign_series_bias_bound(theta, H):
    assert np.max(np.abs(sign_series_of(theta, H) - theta)) <= 1.0 / H


@given(hnp.arrays(float, (2, 3, 2), elements=unit), st.integers(1, 20))
def test_level_sets_survive_increasing_maps(theta, H):
    # sgn(theta - pi) == sgn(g(theta) - g(pi)) for increasing g, here the cube
    levels = np.arange(-H, H + 1) / H
    for pi in levels:
        gap = np.abs(theta - pi)
        exact = (gap == 0) | (gap > 1e-9)  # cubing can round near-ties together
        np.testing.assert_array_equal((theta >= pi)[exact], (theta**3 >= pi**3)[exact])
    signs = [np.where(theta >= pi, 1, -1) for pi in levels]
    np.testing.assert_allclose(aggregate_signs(signs), sign_series_of(theta, H), atol=1e-15)


def test_trivial_sign():
    s = SampleSet((2, 2), [[0, 0], [1, 1]], [0.5, 0.7])
    assert trivial_sign(s, 0.0) == 1
    assert trivial_sign(s, 1.0) == -1
    assert trivial_sign(s, 0.6) is None
    assert trivial_sign(SampleSet((2, 2), [[0, 0]], [0.5]), 0.5) == 1


def test_auto_H():
    assert auto_H(8000, (20, 20, 20), 4) == 10
    assert auto_H(1, (20, 20), 4) == 1


def test_level_seed_distinct():
    assert len({level_seed(0, j) for j in range(41)}) == 41
    assert level_seed(3, 2) == level_seed(3, 2)


def test_constant_signal_within_one_over_H():
    s = SampleSet.from_dense(np.full((3, 3, 3), 0.3))
    est = estimate(s, FitConfig(), 10)
    assert all(f is None for f in est.per_level)
    assert np.max(np.abs(est.aggregate - 0.3)) <= 0.1


def test_signal_at_upper_bound_gives_ones():
    s = SampleSet.from_dense(np.ones((2, 3, 2)))
    np.testing.assert_array_equal(estimate(s, FitConfig(), 5).aggregate, 1.0)


def test_grid_with_H_one():
    r = np.random.default_rng(0)
    s = SampleSet.from_dense(r.uniform(-1, 1, (3, 3, 3)))
    est = estimate(s, FitConfig(rank=2, n_starts=1), 1)
    np.testing.assert_array_equal(est.grid.levels, [-1.0, 0.0, 1.0])
    assert set(np.unique(est.aggregate)) <= {-1 / 3, 1 / 3, 1.0}


def _noisy_samples(seed=0, d=5):
    r = np.random.default_rng(seed)
    theta = np.broadcast_to(r.uniform(-1, 1, (d, 1, 1)), (d, d, d))
    y = np.clip(theta + 0.1 * r.standard_normal(theta.shape), -1, 1)
    return theta, draw_samples(y, SamplingDistribution.uniform(), 2 * d**3, seed)


def test_estimate_independent_of_workers():
    _, s = _noisy_samples()
    cfg = FitConfig(rank=2, n_starts=2, seed=5)
    a = estimate(s, cfg, 4, workers=1)
    b = estimate(s, cfg, 4, workers=3)
    np.testing.assert_array_equal(a.aggregate, b.aggregate)
    assert [r and r.trace for r in a.reports] == [r and r.trace for r in b.reports]


def test_estimate_uses_cache(tmp_path, monkeypatch):
    _, s = _noisy_samples(1)
    cfg = FitConfig(rank=2, n_starts=1)
    first = estimate(s, cfg, 3, cache_dir=tmp_path)
    files = list(tmp_path.rglob("*.npz"))
    assert len(files) == sum(f is not None for f in first.per_level)
    import signtensor.sign_series as ss

    def boom(*args, **kwargs):
        raise AssertionError("level refitted despite cache")

    monkeypatch.setattr(ss, "fit_level", boom)
    second = estimate(s, cfg, 3, cache_dir=tmp_path)
    np.testing.assert_array_equal(first.aggregate, second.aggregate)
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    third = estimate(s, cfg, 3)
    np.testing.assert_array_equal(first.aggregate, third.aggregate)


def test_estimate_recovers_simple_signal():
    theta, s = _noisy_samples(2, d=6)
    est = estimate(s, FitConfig(rank=2, n_starts=2), 5)
    assert mae(est.aggregate, theta) < 0.3
    assert np.all(np.abs(est.aggregate) <= 1.0)


def test_level_signs():
    s = SampleSet.from_dense(np.full((2, 2), 0.3))
    est = estimate(s, FitConfig(), 2)
    np.testing.assert_array_equal(est.level_signs(0), 1)
    np.testing.assert_array_equal(est.level_signs(4), -1)
