import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signtensor.simgen import (
    SimSpec, add_noise, apply_mask, banded_threshold, banded_witness, gen_signal,
    identity_witness, logistic_transform_experiment, max_hypergraphon, simulate,
)


def test_model3_entries():
    theta = gen_signal(SimSpec(model=3, d=3))
    # |1/3 - 2/3| = 1/3 against a maximal band of 2/3
    assert theta[0, 1, 0] == pytest.approx(0.0)
    assert theta[0, 2, 2] == pytest.approx(1.0)
    assert theta[1, 1, 1] == pytest.approx(-1.0)
    np.testing.assert_array_equal(theta[:, :, 0], theta[:, :, 2])


def test_model1_has_at_most_27_values():
    theta = gen_signal(SimSpec(model=1, d=12, seed=4))
    assert np.unique(theta).size <= 27


def test_model4_identity_is_max_grid():
    theta = gen_signal(SimSpec(model=4, d=4, transform="identity"))
    assert theta[0, 2, 1] == pytest.approx(3 / 4)
    low = gen_signal(SimSpec(model=4, d=4, transform="identity", variant="min"))
    assert low[3, 2, 1] == pytest.approx(2 / 4)


@settings(max_examples=100)
@given(st.integers(1, 4), st.integers(2, 6), st.integers(0, 10**6), st.floats(0.1, 20))
def test_signals_within_unit_interval(model, d, seed, c):
    theta = gen_signal(SimSpec(model=model, d=d, seed=seed, c=c))
    assert theta.shape == (d, d, d)
    assert np.all(np.abs(theta) <= 1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec(model=5, d=4)
    with pytest.raises(ValueError):
        SimSpec(model=1, d=4, noise="cauchy")
    with pytest.raises(ValueError):
        SimSpec(model=1, d=4, noise_scale=-1)


def test_logistic_transform_experiment():
    theta, z = logistic_transform_experiment(6, 1e-9, 0, return_latent=True)
    np.testing.assert_allclose(theta, 0.5, atol=1e-6)
    sharp, z2 = logistic_transform_experiment(6, 10.0, 0, return_latent=True)
    np.testing.assert_array_equal(z, z2)
    assert np.all((sharp > 0) & (sharp < 1))
    # monotone transform: level sets of theta are level sets of z
    for pi in (0.2, 0.5, 0.8):
        t = np.log(pi / (1 - pi)) / 10.0
        away = np.abs(z - t) > 1e-9
        np.testing.assert_array_equal((sharp >= pi)[away], (z >= t)[away])
    with pytest.raises(ValueError):
        logistic_transform_experiment(4, 0.0, 0)


def test_max_hypergraphon_examples():
    np.testing.assert_array_equal(max_hypergraphon([[0, 1], [0, 1]]), [[0, 1], [1, 1]])
    x = [np.array([0.2, 0.7])] * 3
    out = max_hypergraphon(x, g=lambda v: np.log1p(v))
    assert out[0, 0, 0] == pytest.approx(np.log(1.2))
    assert out[0, 1, 0] == pytest.approx(np.log(1.7))
    with pytest.raises(ValueError):
        max_hypergraphon([[0.0, 1.5], [0.0]])


def test_max_hypergraphon_level_sets_are_two_block():
    d = 6
    x = np.arange(1, d + 1) / d
    z = max_hypergraphon([x, x])
    for pi in x[:-1]:
        below = x < pi
        expected = np.where(np.outer(below, below), -1, 1)
        np.testing.assert_array_equal(np.where(z - pi >= 0, 1, -1), expected)


@pytest.mark.parametrize("d", [3, 8, 20])
def test_banded_witness(d):
    M, A = banded_witness(d)
    np.testing.assert_array_equal(A, A.T)
    np.testing.assert_array_equal(A, A[::-1, ::-1])
    i, j = np.indices((d, d))
    np.testing.assert_allclose(A, 2.0 ** (-d - 1) * (2.0 ** (j - i) + 2.0 ** (i - j)), rtol=1e-15)
    s = np.linalg.svd(A, compute_uv=False)
    assert s[2] < 1e-10 * s[0]
    assert np.linalg.matrix_rank(M) == d
    for pi in np.arange(-0.5, d, 0.5):
        t = banded_threshold(d, pi)
        np.testing.assert_array_equal(np.sign(A - t) >= 0, np.sign(M - pi) >= 0)


def test_identity_witness():
    d = 5
    _, A = banded_witness(d)
    t = identity_witness(d)
    np.testing.assert_array_equal(np.where(A - t < 0, 1, -1), 2 * np.eye(d) - 1)
    with pytest.raises(OverflowError):
        banded_witness(2000)


def test_add_noise_zero_scale_is_identity():
    theta = gen_signal(SimSpec(model=2, d=5))
    np.testing.assert_array_equal(add_noise(theta, "gaussian", 0.0, seed=1), theta)


@pytest.mark.parametrize("kind", ["gaussian", "uniform"])
def test_noise_has_zero_mean_and_given_scale(kind):
    theta = np.zeros((100, 100, 100))
    y = add_noise(theta, kind, 0.1, seed=2, clip=False)
    assert abs(y.mean()) < 3 * 0.1 / 1e3
    assert y.std() == pytest.approx(0.1, rel=0.01)


def test_binary_noise_mean():
    theta = np.full((100, 100, 10), 0.4)
    y = add_noise(theta, "binary", seed=3)
    assert set(np.unique(y)) == {-1.0, 1.0}
    assert abs(y.mean() - 0.4) < 3 / np.sqrt(y.size)


def test_clip_rate_reported():
    y, rate = add_noise(np.full((10, 10), 0.99), "gaussian", 0.5, seed=0, return_clip_rate=True)
    assert 0 < rate < 1
    assert np.all(np.abs(y) <= 1)


def test_apply_mask():
    y = np.zeros((20, 20, 20))
    assert len(apply_mask(y, 1.0, seed=0)) == 8000
    assert len(apply_mask(y, 0.3, seed=0)) == 2400
    a, b = apply_mask(y, 0.3, seed=5), apply_mask(y, 0.3, seed=5)
    np.testing.assert_array_equal(a.indices, b.indices)
    with pytest.raises(ValueError):
        apply_mask(y, 0.0)


def test_simulate_deterministic():
    spec = SimSpec(model=1, d=5, seed=9)
    t1, y1, s1 = simulate(spec, 0.5)
    t2, y2, s2 = simulate(spec, 0.5)
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_array_equal(s1.values, s2.values)
