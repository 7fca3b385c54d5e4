"""Comparison methods: CP least squares, unfolding-based sign series, mean imputation."""
from __future__ import annotations

import warnings

import numpy as np

from .fit import FitConfig
from .sign_series import estimate
from .tensor_core import CpFactors, SampleSet, cp_materialize, refold, unfold_indices


def _ls_objective(factors, indices, values):
    prod = np.ones((indices.shape[0], factors[0].shape[1]))
    for k, m in enumerate(factors):
        prod *= m[indices[:, k]]
    return float(np.sum((values - prod.sum(axis=1)) ** 2))


def _solve_mode(factors, indices, values, mode, ridge):
    d = factors[mode].shape[0]
    r = factors[mode].shape[1]
    rows = indices[:, mode]
    prod = np.ones((indices.shape[0], r))
    for j, m in enumerate(factors):
        if j != mode:
            prod *= m[indices[:, j]]
    gram = np.empty((d, r, r))
    for a in range(r):
        for b in range(a, r):
            gram[:, a, b] = gram[:, b, a] = np.bincount(rows, prod[:, a] * prod[:, b], minlength=d)
    rhs = np.stack([np.bincount(rows, prod[:, a] * values, minlength=d) for a in range(r)], axis=1)
    gram += ridge * np.eye(r)
    sol = np.linalg.solve(gram, rhs[..., None])[..., 0]
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular normal equations")
    return sol


def cp_als_trace(samples: SampleSet, r: int, cfg: FitConfig, seed: int):
    """Single-start ALS returning factors and the per-half-sweep objective."""
    rng = np.random.default_rng(seed)
    scale = cfg.init_scale / np.sqrt(r)
    factors = [scale * rng.standard_normal((d, r)) for d in samples.dims]
    idx, vals = samples.indices, samples.values
    obj = _ls_objective(factors, idx, vals)
    trace = [obj]
    for _ in range(cfg.max_sweeps):
        start = obj
        for k in range(len(factors)):
            factors[k] = _solve_mode(factors, idx, vals, k, cfg.ridge)
            obj = _ls_objective(factors, idx, vals)
            trace.append(obj)
        if start - obj <= cfg.tol_rel * max(start, 1e-300):
            break
    return factors, trace


def cp_als(samples: SampleSet, r: int, cfg: FitConfig | None = None) -> CpFactors:
    """Rank-``r`` CP fit of the observed entries by ridge-regularised ALS.

    Runs ``cfg.n_starts`` starts seeded ``cfg.seed + j`` and keeps the one
    with the lowest squared error. Predictions are not clipped.
    """
    cfg = cfg or FitConfig()
    if len(samples) == 0:
        raise ValueError("empty sample set")
    if len(samples) < r * sum(samples.dims):
        warnings.warn(
            f"{len(samples)} observations for {r * sum(samples.dims)} CP parameters",
            stacklevel=2,
        )
    best, best_obj = None, np.inf
    for j in range(cfg.n_starts):
        factors, trace = cp_als_trace(samples, r, cfg, cfg.seed + j)
        if trace[-1] < best_obj:
            best, best_obj = factors, trace[-1]
    return CpFactors(tuple(best))


def cp_als_predict(f: CpFactors, clip: bool = False) -> np.ndarray:
    out = cp_materialize(f)
    return np.clip(out, -1.0, 1.0) if clip else out


def naive_impute(samples: SampleSet) -> float:
    """Mean of the observed values."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    return float(np.mean(samples.values))


def nonpara_matrix(samples: SampleSet, cfg: FitConfig, H: int, workers: int = 1) -> list:
    """Sign-series estimate of each mode unfolding, refolded to a tensor.

    Returns one dense estimate per mode. An order-2 input is estimated
    directly, so the result is a single-element list.
    """
    if samples.ndim == 2:
        return [estimate(samples, cfg, H, workers=workers).aggregate]
    out = []
    for k in range(samples.ndim):
        idx, shape = unfold_indices(samples.indices, samples.dims, k)
        mat = SampleSet(shape, idx, samples.values)
        est = estimate(mat, cfg, H, workers=workers)
        out.append(refold(est.aggregate, k, samples.dims))
    return out
