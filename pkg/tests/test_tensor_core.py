import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from signtensor.tensor_core import (
    CpFactors, SampleSet, SamplingDistribution, cp_eval, cp_frobenius_norm, cp_materialize,
    cp_values, draw_samples, mae, refold, sign_of, unfold, unfold_indices,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_sign_of_examples():
    assert sign_of(0.0) == 1
    assert sign_of(-0.3) == -1
    assert sign_of(2.5) == 1
    np.testing.assert_array_equal(sign_of(np.array([-1.0, 0.0, 1e-300])), [-1, 1, 1])


@given(hnp.arrays(float, st.integers(1, 20), elements=finite))
def test_sign_of_is_idempotent_and_binary(x):
    s = sign_of(x)
    assert set(np.unique(s)) <= {-1, 1}
    np.testing.assert_array_equal(sign_of(s), s)


def test_cp_eval_examples():
    ones = CpFactors((np.ones((3, 1)), np.ones((3, 1)), np.ones((3, 1))))
    assert cp_eval(ones, (2, 1, 0)) == 1.0
    f = CpFactors((np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]])))
    assert cp_eval(f, (1, 0)) == 6.0
    # a zero second component contributes nothing
    g = CpFactors((np.array([[1.0, 5.0], [2.0, 7.0]]), np.array([[3.0, 0.0], [4.0, 0.0]])))
    assert cp_eval(g, (1, 0)) == 6.0


def test_cp_eval_rejects_bad_index():
    f = CpFactors((np.ones((2, 1)), np.ones((3, 1))))
    with pytest.raises(IndexError):
        cp_eval(f, (2, 0))
    with pytest.raises(IndexError):
        cp_eval(f, (0,))


def test_cp_factors_validation():
    with pytest.raises(ValueError):
        CpFactors((np.ones((2, 1)),))
    with pytest.raises(ValueError):
        CpFactors((np.ones((2, 1)), np.ones((2, 2))))
    with pytest.raises(ValueError):
        CpFactors((np.ones((2, 1)), np.array([[np.nan], [1.0]])))


def test_cp_materialize_examples():
    f = CpFactors((np.array([[1.0], [0.0]]), np.array([[1.0], [1.0]])))
    np.testing.assert_array_equal(cp_materialize(f), [[1, 1], [0, 0]])
    z = CpFactors((np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((4, 2))))
    np.testing.assert_array_equal(cp_materialize(z), np.zeros((2, 3, 4)))


def test_cp_materialize_budget():
    f = CpFactors((np.ones((100, 1)), np.ones((100, 1)), np.ones((100, 1))))
    with pytest.raises(MemoryError):
        cp_materialize(f, budget=10_000)


@given(st.lists(st.integers(1, 4), min_size=2, max_size=4), st.integers(1, 3), st.integers(0, 2**31))
def test_materialize_agrees_with_pointwise_eval(dims, r, seed):
    f = CpFactors.random(dims, r, np.random.default_rng(seed))
    dense = cp_materialize(f)
    assert dense.shape == tuple(dims)
    for idx in np.ndindex(*dims):
        assert dense[idx] == pytest.approx(cp_eval(f, idx), rel=1e-12, abs=1e-12)
    idx = np.indices(dims).reshape(len(dims), -1).T
    np.testing.assert_allclose(cp_values(f, idx), dense.ravel(), rtol=1e-12, atol=1e-14)
    assert cp_frobenius_norm(f) == pytest.approx(np.linalg.norm(dense), rel=1e-10, abs=1e-12)


def test_mae_examples():
    assert mae(np.ones((2, 2)), np.zeros((2, 2))) == 1.0
    assert mae(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 0.0]])
    assert mae(a.reshape(1, 2), b.reshape(1, 2), SamplingDistribution.explicit([[1.0, 0.0]])) == 1.0
    with pytest.raises(ValueError):
        mae(np.zeros((2, 2)), np.zeros((2, 3)))


@given(st.integers(0, 2**31))
def test_mae_symmetric_and_triangle(seed):
    r = np.random.default_rng(seed)
    a, b, c = (r.uniform(-1, 1, (3, 2, 2)) for _ in range(3))
    assert mae(a, b) == pytest.approx(mae(b, a))
    assert mae(a, c) <= mae(a, b) + mae(b, c) + 1e-12
    assert mae(a, a) == 0.0


def test_sampling_distribution_validation():
    with pytest.raises(ValueError):
        SamplingDistribution("explicit", np.array([0.5, 0.6]))
    p = SamplingDistribution.explicit([[2.0, 2.0]])
    np.testing.assert_allclose(p.probabilities((1, 2)), [0.5, 0.5])
    np.testing.assert_allclose(SamplingDistribution.uniform().probabilities((2, 2)), 0.25)


def test_draw_samples_constant_tensor():
    s = draw_samples(np.full((3, 3), 0.7), SamplingDistribution.uniform(), 50, seed=1)
    assert len(s) == 50
    np.testing.assert_array_equal(s.values, 0.7)


def test_draw_samples_point_mass():
    t = np.arange(8.0).reshape(2, 2, 2) / 10
    p = SamplingDistribution.point_mass(t.shape, (1, 0, 1))
    s = draw_samples(t, p, 20, seed=3)
    assert np.all(s.indices == [1, 0, 1])
    np.testing.assert_array_equal(s.values, t[1, 0, 1])


def test_draw_samples_deterministic():
    t = np.linspace(-1, 1, 24).reshape(2, 3, 4)
    a = draw_samples(t, SamplingDistribution.uniform(), 100, seed=7)
    b = draw_samples(t, SamplingDistribution.uniform(), 100, seed=7)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("kind", ["uniform", "explicit"])
def test_draw_samples_frequencies_match_distribution(kind):
    dims = (3, 4)
    if kind == "uniform":
        p = SamplingDistribution.uniform()
    else:
        p = SamplingDistribution.explicit(np.arange(1.0, 13.0).reshape(dims))
    n = 100_000
    s = draw_samples(np.zeros(dims), p, n, seed=11)
    counts = np.bincount(np.ravel_multi_index(tuple(s.indices.T), dims), minlength=12)
    expected = n * p.probabilities(dims)
    assert stats.chisquare(counts, expected).pvalue > 1e-3


def test_sample_set_validation():
    with pytest.raises(IndexError):
        SampleSet((2, 2), [[0, 2]], [0.1])
    with pytest.raises(ValueError):
        SampleSet((2, 2), [[0, 1]], [1.5])
    with pytest.raises(ValueError):
        SampleSet((2, 2), [[0, 1]], [np.nan])
    s = SampleSet((2, 2), [[0, 1], [0, 1]], [0.1, 0.2])
    assert len(s) == 2  # duplicates are kept
    with pytest.raises(ValueError):
        s.values[0] = 0.0


def test_unfold_layout():
    code = np.array([[[100 * i + 10 * j + k for k in range(2)] for j in range(2)] for i in range(2)])
    np.testing.assert_array_equal(unfold(code, 0), [[0, 10, 1, 11], [100, 110, 101, 111]])
    np.testing.assert_array_equal(unfold(code, 2), [[0, 100, 10, 110], [1, 101, 11, 111]])
    m = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(unfold(m, 0), m)
    np.testing.assert_array_equal(unfold(m, 1), m.T)
    with pytest.raises(ValueError):
        unfold(m, 2)


@given(st.lists(st.integers(1, 4), min_size=2, max_size=4), st.data())
def test_refold_inverts_unfold(dims, data):
    t = np.arange(np.prod(dims), dtype=float).reshape(dims)
    mode = data.draw(st.integers(0, len(dims) - 1))
    np.testing.assert_array_equal(refold(unfold(t, mode), mode, dims), t)
    idx = np.indices(dims).reshape(len(dims), -1).T
    rc, shape = unfold_indices(idx, dims, mode)
    u = unfold(t, mode)
    assert u.shape == shape
    np.testing.assert_array_equal(u[rc[:, 0], rc[:, 1]], t[tuple(idx.T)])
