"""Weighted classification loss, large-margin surrogates and risk oracles."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tensor_core import (
    CpFactors,
    SampleSet,
    SamplingDistribution,
    cp_values,
    sign_of,
)


class SurrogateKind(str, Enum):
    HINGE = "hinge"
    LOGISTIC = "logistic"
    PSI = "psi"


def surrogate(m, kind) -> np.ndarray:
    """Large-margin loss ``F(m)``."""
    kind = SurrogateKind(kind)
    m = np.asarray(m, dtype=float)
    if kind is SurrogateKind.HINGE:
        return np.maximum(1.0 - m, 0.0)
    if kind is SurrogateKind.LOGISTIC:
        return np.logaddexp(0.0, -m)
    return 2.0 * np.minimum(1.0, np.maximum(1.0 - m, 0.0))


def surrogate_derivative(m, kind) -> np.ndarray:
    """``dF/dm``; the value at each kink is 0."""
    kind = SurrogateKind(kind)
    m = np.asarray(m, dtype=float)
    if kind is SurrogateKind.HINGE:
        return np.where(m < 1.0, -1.0, 0.0)
    if kind is SurrogateKind.LOGISTIC:
        # -1 / (1 + e^m), written to avoid overflow
        return -np.exp(-np.logaddexp(0.0, m))
    return np.where((m > 0.0) & (m < 1.0), -2.0, 0.0)


@dataclass(frozen=True)
class LevelGrid:
    """Equispaced levels ``{-1, ..., -1/H, 0, 1/H, ..., 1}``."""

    H: int

    def __post_init__(self):
        if int(self.H) != self.H or self.H < 1:
            raise ValueError("H must be a positive integer")

    @property
    def levels(self) -> np.ndarray:
        return (np.arange(2 * self.H + 1) - self.H) / self.H

    def __len__(self) -> int:
        return 2 * self.H + 1


def level_weights(values, pi: float):
    """Entry weights ``|y - pi|`` and labels ``sgn(y - pi)``."""
    shifted = np.asarray(values, dtype=float) - pi
    return np.abs(shifted), sign_of(shifted).astype(float)


def _check_level(pi):
    if not -1.0 <= pi <= 1.0:
        raise ValueError(f"level {pi} outside [-1, 1]")


def _values_at(z, samples: SampleSet) -> np.ndarray:
    if isinstance(z, CpFactors):
        return cp_values(z, samples.indices)
    z = np.asarray(z, dtype=float)
    if z.shape != samples.dims:
        raise ValueError(f"dimension mismatch {z.shape} vs {samples.dims}")
    return z[tuple(samples.indices.T)]


def weighted_loss(z, samples: SampleSet, pi: float) -> float:
    """Mean weighted 0/1 sign disagreement between ``z`` and ``y - pi``.

    ``z`` may be a dense array or :class:`CpFactors`. Each misclassified
    entry contributes ``2 |y - pi|``.
    """
    _check_level(pi)
    if len(samples) == 0:
        raise ValueError("empty sample set")
    w, labels = level_weights(samples.values, pi)
    zs = sign_of(_values_at(z, samples))
    return float(np.mean(w * np.abs(zs - labels)))


def surrogate_objective(f: CpFactors, samples: SampleSet, pi: float, kind) -> float:
    """Sum over observations of ``|y - pi| F(z sgn(y - pi))``."""
    _check_level(pi)
    if len(samples) == 0:
        raise ValueError("empty sample set")
    w, labels = level_weights(samples.values, pi)
    m = cp_values(f, samples.indices) * labels
    return float(np.dot(w, surrogate(m, kind)))


def mode_products(f: CpFactors, indices, mode: int) -> np.ndarray:
    """``P[n, s] = prod_{j != mode} A_j[i_j(n), s]`` for each observation."""
    prod = np.ones((indices.shape[0], f.rank))
    for j, m in enumerate(f.factors):
        if j != mode:
            prod *= m[indices[:, j]]
    return prod


def surrogate_gradient(f: CpFactors, samples: SampleSet, pi: float, kind, mode: int) -> np.ndarray:
    """Gradient of :func:`surrogate_objective` with respect to factor ``mode``."""
    _check_level(pi)
    if not 0 <= mode < f.ndim:
        raise ValueError(f"mode {mode} out of range")
    if len(samples) == 0:
        raise ValueError("empty sample set")
    w, labels = level_weights(samples.values, pi)
    prod = mode_products(f, samples.indices, mode)
    rows = samples.indices[:, mode]
    m = np.sum(f.factors[mode][rows] * prod, axis=1) * labels
    coef = w * surrogate_derivative(m, kind) * labels
    d = f.dims[mode]
    return np.stack(
        [np.bincount(rows, weights=coef * prod[:, s], minlength=d) for s in range(f.rank)],
        axis=1,
    )


def excess_risk_oracle(z_sign, theta, pi: float, p: SamplingDistribution | None = None) -> float:
    """Population excess weighted risk of a sign tensor, by enumeration.

    Equals ``E_{w ~ p} |sgn(theta(w) - pi) - z(w)| |theta(w) - pi|``.
    """
    z_sign = np.asarray(z_sign, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if z_sign.shape != theta.shape:
        raise ValueError(f"dimension mismatch {z_sign.shape} vs {theta.shape}")
    if not np.all(np.isin(z_sign, (-1.0, 1.0))):
        raise ValueError("z_sign entries must be -1 or +1")
    p = p or SamplingDistribution.uniform()
    per_entry = np.abs(sign_of(theta - pi) - z_sign) * np.abs(theta - pi)
    return float(np.dot(p.probabilities(theta.shape), per_entry.ravel()))


def empirical_cdf(theta, p: SamplingDistribution | None, pi: float) -> float:
    """``P_{w ~ p}[theta(w) <= pi]``."""
    theta = np.asarray(theta, dtype=float)
    p = p or SamplingDistribution.uniform()
    return float(np.dot(p.probabilities(theta.shape), (theta.ravel() <= pi)))
