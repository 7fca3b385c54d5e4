"""Dense tensors, CP factors, sampling and elementary metrics.

Dense tensors are plain :class:`numpy.ndarray` objects (C order, 0-based
indices). CP factors and observation sets are small frozen containers around
arrays that are marked read-only on construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Largest dense tensor cp_materialize will allocate (entries).
MATERIALIZE_BUDGET = 50_000_000


def sign_of(x):
    """Sign with the convention ``sign_of(0) == +1``.

    Works on scalars and arrays; the result is ``int8``-valued in {-1, +1}
    for arrays and a plain ``int`` for scalars.
    """
    if np.ndim(x) == 0:
        return 1 if x >= 0 else -1
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CpFactors:
    """Rank-``r`` CP tensor ``sum_s a_s^(1) o ... o a_s^(K)``.

    Singular values are not stored separately; they are absorbed into the
    columns of the last factor.
    """

    factors: tuple

    def __post_init__(self):
        mats = tuple(_readonly(np.atleast_2d(f)) for f in self.factors)
        if len(mats) < 2:
            raise ValueError("CP factors need at least two modes")
        r = mats[0].shape[1]
        if r < 1 or any(m.ndim != 2 or m.shape[1] != r for m in mats):
            raise ValueError("all factor matrices must share a column count r >= 1")
        if not all(np.all(np.isfinite(m)) for m in mats):
            raise ValueError("CP factors contain non-finite entries")
        object.__setattr__(self, "factors", mats)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple:
        return tuple(m.shape[0] for m in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def replace(self, mode: int, matrix) -> "CpFactors":
        mats = list(self.factors)
        mats[mode] = matrix
        return CpFactors(tuple(mats))

    @classmethod
    def random(cls, dims, rank, rng, scale=0.5) -> "CpFactors":
        """I.i.d. N(0, 1) entries scaled by ``scale / sqrt(rank)``."""
        s = scale / np.sqrt(rank)
        return cls(tuple(s * rng.standard_normal((d, rank)) for d in dims))


def cp_eval(f: CpFactors, idx) -> float:
    """Value of the CP tensor at one multi-index."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != f.ndim:
        raise IndexError(f"expected {f.ndim} indices, got {len(idx)}")
    for i, d in zip(idx, f.dims):
        if not 0 <= i < d:
            raise IndexError(f"index {idx} out of bounds for dims {f.dims}")
    prod = np.ones(f.rank)
    for m, i in zip(f.factors, idx):
        prod = prod * m[i]
    return float(prod.sum())


def cp_values(f: CpFactors, indices) -> np.ndarray:
    """Vectorised :func:`cp_eval` over an ``(n, K)`` index array."""
    indices = np.asarray(indices)
    prod = np.ones((indices.shape[0], f.rank))
    for k, m in enumerate(f.factors):
        prod *= m[indices[:, k]]
    return prod.sum(axis=1)


def cp_materialize(f: CpFactors, budget: int = MATERIALIZE_BUDGET) -> np.ndarray:
    """Full dense tensor of a CP representation."""
    size = int(np.prod(f.dims))
    if size > budget:
        raise MemoryError(f"tensor of {size} entries exceeds budget of {budget}")
    letters = "abcdefghijklmnopqrstuvwxy"[: f.ndim]
    expr = ",".join(c + "z" for c in letters) + "->" + letters
    return np.einsum(expr, *f.factors)


def cp_frobenius_norm(f: CpFactors) -> float:
    gram = np.ones((f.rank, f.rank))
    for m in f.factors:
        gram *= m.T @ m
    return float(np.sqrt(max(gram.sum(), 0.0)))


@dataclass(frozen=True)
class SamplingDistribution:
    """Distribution over the full index set.

    ``kind='uniform'`` needs no weights; ``kind='explicit'`` carries a flat
    (C-order) weight vector of length ``prod(dims)`` summing to one.
    """

    kind: str = "uniform"
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if self.weights is not None:
                raise ValueError("uniform distribution takes no weights")
            return
        if self.kind != "explicit":
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        w = _readonly(np.ravel(self.weights))
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("sampling weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"sampling weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls) -> "SamplingDistribution":
        return cls("uniform")

    @classmethod
    def explicit(cls, weights) -> "SamplingDistribution":
        w = np.asarray(weights, dtype=float).ravel()
        return cls("explicit", w / w.sum() if w.sum() > 0 else w)

    @classmethod
    def point_mass(cls, dims, idx) -> "SamplingDistribution":
        w = np.zeros(int(np.prod(dims)))
        w[np.ravel_multi_index(tuple(idx), dims)] = 1.0
        return cls("explicit", w)

    def probabilities(self, dims) -> np.ndarray:
        """Flat probability vector for a tensor of shape ``dims``."""
        size = int(np.prod(dims))
        if self.kind == "uniform":
            return np.full(size, 1.0 / size)
        if self.weights.size != size:
            raise ValueError(
                f"distribution has {self.weights.size} weights, tensor has {size} entries"
            )
        return self.weights


@dataclass(frozen=True)
class SampleSet:
    """Observed entries ``(index, value)`` drawn with replacement.

    ``indices`` is an ``(n, K)`` integer array and ``values`` a length-``n``
    float array. Duplicated indices are kept as separate draws.
    """

    dims: tuple
    indices: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        idx = _readonly(np.atleast_2d(self.indices), dtype=np.int64)
        vals = _readonly(np.ravel(self.values))
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"invalid dims {dims}")
        if idx.size == 0:
            idx = _readonly(np.empty((0, len(dims))), dtype=np.int64)
        if idx.shape != (vals.size, len(dims)):
            raise ValueError("indices must be (n, K) with one value per row")
        if idx.size and (np.any(idx < 0) or np.any(idx >= np.array(dims))):
            raise IndexError("sample index out of bounds")
        if not np.all(np.isfinite(vals)):
            raise ValueError("observed values must be finite")
        if vals.size and (vals.min() < -1.0 or vals.max() > 1.0):
            raise ValueError("observed values must lie in [-1, 1]")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def subset(self, mask_or_idx) -> "SampleSet":
        return SampleSet(self.dims, self.indices[mask_or_idx], self.values[mask_or_idx])

    def canonical_order(self) -> np.ndarray:
        """Permutation sorting entries by index, then value."""
        keys = [self.values] + [self.indices[:, k] for k in reversed(range(self.ndim))]
        return np.lexsort(keys)

    @classmethod
    def from_dense(cls, tensor) -> "SampleSet":
        """Every entry observed exactly once."""
        tensor = np.asarray(tensor, dtype=float)
        idx = np.indices(tensor.shape).reshape(tensor.ndim, -1).T
        return cls(tensor.shape, idx, tensor.ravel())


def mae(t1, t2, p: SamplingDistribution | None = None) -> float:
    """Mean absolute error weighted by the sampling distribution."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if t1.shape != t2.shape:
        raise ValueError(f"dimension mismatch {t1.shape} vs {t2.shape}")
    p = p or SamplingDistribution.uniform()
    return float(np.dot(p.probabilities(t1.shape), np.abs(t1 - t2).ravel()))


def draw_samples(src, p: SamplingDistribution, n: int, seed: int) -> SampleSet:
    """Draw ``n`` entries i.i.d. with replacement from ``p``."""
    src = np.asarray(src, dtype=float)
    if n < 1:
        raise ValueError("need at least one draw")
    rng = np.random.default_rng(seed)
    if p.kind == "uniform":
        flat = rng.integers(0, src.size, size=n)
    else:
        flat = rng.choice(src.size, size=n, replace=True, p=p.probabilities(src.shape))
    idx = np.stack(np.unravel_index(flat, src.shape), axis=1)
    return SampleSet(src.shape, idx, src.ravel()[flat])


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (0-based mode).

    Rows are indexed by the chosen mode. Columns enumerate the remaining
    modes with the earliest remaining mode varying fastest.
    """
    t = np.asarray(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def refold(m, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    dims = tuple(dims)
    rest = dims[:mode] + dims[mode + 1 :]
    return np.moveaxis(np.reshape(m, (dims[mode],) + rest, order="F"), 0, mode)


def unfold_indices(indices, dims, mode: int) -> tuple[np.ndarray, tuple]:
    """Map tensor multi-indices to (row, column) indices of :func:`unfold`."""
    indices = np.asarray(indices)
    dims = tuple(dims)
    rest = [k for k in range(len(dims)) if k != mode]
    cols = np.ravel_multi_index(
        tuple(indices[:, k] for k in rest), tuple(dims[k] for k in rest), order="F"
    )
    shape = (dims[mode], int(np.prod([dims[k] for k in rest])))
    return np.stack([indices[:, mode], cols], axis=1), shape
