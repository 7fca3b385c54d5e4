"""Synthetic signals, noise and masking for simulation studies.

The four order-3 models are:

1. block tensor with three clusters per mode and uniform block means;
2. an odd logistic transform of a rank-3 tensor;
3. the stacked banded tensor ``|a_i - a_j|`` rescaled to [-1, 1];
4. an exponential transform of the max (or min) hypergraphon.

Models 2 and 4 only fix the ingredients; their transforms are configurable
and the defaults are our own choice.

Also included are the constructions showing that high-rank tensors can have
low sign-rank (max hypergraphon, banded and identity witnesses).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tensor_core import SamplingDistribution, SampleSet, draw_samples

log = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "uniform", "binary")
# Largest d for which the banded witness is built in float64.
MAX_WITNESS_DIM = 1000


@dataclass(frozen=True)
class SimSpec:
    model: int
    d: int
    noise: str = "gaussian"
    noise_scale: float = 0.1
    seed: int = 0
    c: float = 5.0
    transform: str | None = None
    variant: str = "max"

    def __post_init__(self):
        if self.model not in (1, 2, 3, 4):
            raise ValueError(f"invalid model id {self.model}")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.noise_scale < 0:
            raise ValueError("noise scale must be nonnegative")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        if self.variant not in ("max", "min"):
            raise ValueError("variant must be 'max' or 'min'")


def _block_tensor(d, rng, blocks=3):
    members = [rng.integers(0, blocks, size=d) for _ in range(3)]
    means = rng.uniform(-1.0, 1.0, size=(blocks,) * 3)
    return means[np.ix_(*members)]


def _symmetric_rank3(d, rng):
    z = np.zeros((d, d, d))
    for _ in range(3):
        a = rng.standard_normal(d)
        z += np.einsum("i,j,k->ijk", a, a, a)
    return z


def _hypergraphon_grid(d, variant):
    a = np.arange(1, d + 1) / d
    reduce = np.maximum if variant == "max" else np.minimum
    return reduce(reduce(a[:, None, None], a[None, :, None]), a[None, None, :])


def gen_signal(spec: SimSpec) -> np.ndarray:
    """Signal tensor of shape ``(d, d, d)`` with entries in [-1, 1]."""
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    if spec.model == 1:
        return _block_tensor(d, rng)
    if spec.model == 2:
        z = _symmetric_rank3(d, rng)
        z = z / z.std()
        if spec.transform == "identity":
            return z / np.abs(z).max()
        return 2.0 * expit(spec.c * z) - 1.0
    if spec.model == 3:
        a = np.arange(1, d + 1) / d
        band = np.abs(a[:, None] - a[None, :])
        return np.broadcast_to((2.0 * band / band.max() - 1.0)[:, :, None], (d, d, d)).copy()
    z = _hypergraphon_grid(d, spec.variant)
    if spec.transform == "identity":
        return z
    return 2.0 * np.expm1(z) / np.expm1(1.0) - 1.0


def logistic_transform_experiment(d: int, c: float, seed, return_latent: bool = False):
    """``f(Z)`` with ``f(z) = 1 / (1 + exp(-c z))`` and ``Z = a^3 + b^3 + c^3``.

    The three vectors have i.i.d. standard normal entries.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    z = _symmetric_rank3(d, np.random.default_rng(seed))
    theta = expit(c * z)
    return (theta, z) if return_latent else theta


def max_hypergraphon(x_vectors, g=None, reduce: str = "max") -> np.ndarray:
    """``g(max_k x^(k)[i_k])`` (or the minimum) over all index tuples."""
    xs = [np.asarray(x, dtype=float) for x in x_vectors]
    if any(np.any((x < 0) | (x > 1)) for x in xs):
        raise ValueError("hypergraphon coordinates must lie in [0, 1]")
    op = {"max": np.maximum, "min": np.minimum}[reduce]
    z = np.asarray(0.0 if reduce == "max" else 1.0)
    for k, x in enumerate(xs):
        shape = [1] * len(xs)
        shape[k] = x.size
        z = op(z, x.reshape(shape))
    return g(z) if g is not None else z


def banded_witness(d: int):
    """Banded matrix ``M(i, j) = |i - j|`` and its rank-2 sign witness ``A``.

    ``A = b rev(b)^T + rev(b) b^T`` with ``b = (2^-1, ..., 2^-d)``, so that
    ``A(i, j) = 2^(-d-1) (2^(j-i) + 2^(i-j))`` grows with ``|i - j|``.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if d > MAX_WITNESS_DIM:
        raise OverflowError(f"2^-{d} underflows double precision")
    i = np.arange(d)
    band = np.abs(i[:, None] - i[None, :])
    # both terms are exact powers of two
    A = np.ldexp(1.0, band - d - 1) + np.ldexp(1.0, -band - d - 1)
    return band.astype(float), A


def banded_threshold(d: int, pi: float) -> float:
    """Threshold ``pi'`` with ``sgn(A - pi') == sgn(M - pi)``."""
    k = int(np.ceil(pi))
    if k <= 0:
        return float(np.ldexp(1.0, -d))
    if k > d - 1:
        return float(np.ldexp(1.0, 0))
    return float(np.ldexp(1.0, k - d - 1) + np.ldexp(1.0, -k - d - 1))


def identity_witness(d: int) -> float:
    """Threshold ``2^-d + 2^-(d+3)`` turning the banded witness into ``2I - 1``."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if d > MAX_WITNESS_DIM:
        raise OverflowError(f"2^-{d} underflows double precision")
    return float(np.ldexp(1.0, -d) + np.ldexp(1.0, -d - 3))


def add_noise(theta, kind: str = "gaussian", scale: float = 0.1, seed=0, clip: bool = True,
              return_clip_rate: bool = False):
    """Observation ``Y = theta + E``.

    ``binary`` draws ``Y`` in {-1, 1} with mean ``theta`` and ignores
    ``scale``. The other kinds add i.i.d. noise with standard deviation
    ``scale`` and then clip to [-1, 1] unless ``clip=False``.
    """
    theta = np.asarray(theta, dtype=float)
    if scale < 0:
        raise ValueError("noise scale must be nonnegative")
    rng = np.random.default_rng(seed)
    if kind == "binary":
        y = np.where(rng.random(theta.shape) < (1.0 + theta) / 2.0, 1.0, -1.0)
        return (y, 0.0) if return_clip_rate else y
    if kind == "gaussian":
        y = theta + scale * rng.standard_normal(theta.shape)
    elif kind == "uniform":
        half = scale * np.sqrt(3.0)
        y = theta + rng.uniform(-half, half, size=theta.shape)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    rate = float(np.mean(np.abs(y) > 1.0))
    if clip:
        y = np.clip(y, -1.0, 1.0)
        if rate:
            log.info("clipped %.2f%% of noisy entries", 100 * rate)
    return (y, rate) if return_clip_rate else y


def apply_mask(y, fraction: float, p: SamplingDistribution | None = None, seed=0) -> SampleSet:
    """Draw ``round(fraction * size)`` entries with replacement."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    y = np.asarray(y, dtype=float)
    n = int(round(fraction * y.size))
    return draw_samples(y, p or SamplingDistribution.uniform(), max(n, 1), seed)


def simulate(spec: SimSpec, fraction: float = 1.0):
    """Signal, noisy tensor and observed sample set for one replicate."""
    theta = gen_signal(spec)
    ss = np.random.SeedSequence(spec.seed).spawn(2)
    noise_seed, mask_seed = (int(s.generate_state(1)[0]) for s in ss)
    y = add_noise(theta, spec.noise, spec.noise_scale, noise_seed)
    return theta, y, apply_mask(y, fraction, seed=mask_seed)
