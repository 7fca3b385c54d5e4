"""Sign-series estimator: classify at every level, then average the signs."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fit import FitConfig, FitReport, fit_level
from .losses import LevelGrid, level_weights
from .tensor_core import CpFactors, SampleSet, cp_materialize, sign_of

log = logging.getLogger(__name__)

CACHE_ENV = "SIGNTENSOR_CACHE"


class LevelFitError(RuntimeError):
    def __init__(self, level, cause):
        super().__init__(f"fit failed at level {level}: {cause}")
        self.level = level


@dataclass(frozen=True)
class SignSeriesEstimate:
    """Per-level classifiers and their averaged sign tensor.

    ``per_level[j]`` is ``None`` for levels where every weighted observation
    carries the same sign; ``constant_signs[j]`` then records that sign.
    """

    grid: LevelGrid
    per_level: tuple
    reports: tuple
    constant_signs: tuple
    aggregate: np.ndarray

    def level_signs(self, j: int) -> np.ndarray:
        f = self.per_level[j]
        if f is None:
            return np.full(self.aggregate.shape, self.constant_signs[j], dtype=np.int8)
        return sign_of(cp_materialize(f))


def aggregate_signs(signs) -> np.ndarray:
    """Entrywise mean of a non-empty list of sign tensors."""
    signs = [np.asarray(s) for s in signs]
    if not signs:
        raise ValueError("need at least one sign tensor")
    shape = signs[0].shape
    total = np.zeros(shape)
    for s in signs:
        if s.shape != shape:
            raise ValueError(f"dimension mismatch {s.shape} vs {shape}")
        if not np.all((s == 1) | (s == -1)):
            raise ValueError("sign tensors must contain only -1 and +1")
        total += s
    return total / len(signs)


def sign_series_of(theta, H: int) -> np.ndarray:
    """Exact grid average of ``sgn(theta - pi)`` over all levels."""
    theta = np.asarray(theta, dtype=float)
    levels = LevelGrid(H).levels
    counts = np.zeros(theta.shape)
    for pi in levels:
        counts += theta >= pi
    return (2.0 * counts - levels.size) / levels.size


def level_seed(seed: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, j]).generate_state(1)[0])


def trivial_sign(samples: SampleSet, pi: float):
    """Common sign of all positively weighted observations, or None."""
    w, labels = level_weights(samples.values, pi)
    labels = labels[w > 0]
    if labels.size == 0:
        return 1
    if np.all(labels == labels[0]):
        return int(labels[0])
    return None


def auto_H(n_obs: int, dims, rank: int) -> int:
    """Resolution balancing bias and variance: ``sqrt(n / (d_max r))``."""
    return max(1, int(round(np.sqrt(n_obs / (max(dims) * rank)))))


def _data_hash(samples: SampleSet) -> str:
    order = samples.canonical_order()
    h = hashlib.sha256()
    h.update(np.asarray(samples.dims, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(samples.indices[order]).tobytes())
    h.update(np.ascontiguousarray(samples.values[order]).tobytes())
    return h.hexdigest()[:24]


def _cfg_hash(cfg: FitConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:24]


class _LevelCache:
    def __init__(self, root, samples, cfg):
        self.dir = Path(root) / _data_hash(samples) / _cfg_hash(cfg)

    def _path(self, pi):
        return self.dir / f"level_{pi!r}.npz"

    def load(self, pi):
        path = self._path(pi)
        if not path.exists():
            return None
        with np.load(path) as data:
            mats = tuple(data[f"f{k}"] for k in range(int(data["K"])))
            trace = tuple(float(v) for v in data["trace"])
            starts = tuple(float(v) for v in data["starts"])
            report = FitReport(trace[-1], int(data["sweeps"]), trace, int(data["start"]), starts)
        return CpFactors(mats), report

    def store(self, pi, f, report):
        self.dir.mkdir(parents=True, exist_ok=True)
        arrays = {f"f{k}": m for k, m in enumerate(f.factors)}
        tmp = self._path(pi).with_suffix(".tmp.npz")
        np.savez(
            tmp, K=f.ndim, trace=np.array(report.trace), sweeps=report.sweeps,
            start=report.start, starts=np.array(report.start_objectives), **arrays,
        )
        os.replace(tmp, self._path(pi))


def _fit_one(samples, pi, cfg, cache):
    if cache is not None:
        hit = cache.load(pi)
        if hit is not None:
            return hit
    try:
        f, report = fit_level(samples, pi, cfg)
    except Exception as exc:  # annotate with the failing level
        raise LevelFitError(pi, exc) from exc
    if cache is not None:
        cache.store(pi, f, report)
    return f, report


def estimate(
    samples: SampleSet,
    cfg: FitConfig,
    H: int,
    workers: int = 1,
    cache_dir=None,
) -> SignSeriesEstimate:
    """Fit every level of the ``H`` grid and average the sign tensors.

    Level ``j`` runs with seed ``level_seed(cfg.seed, j)``, so the result
    does not depend on ``workers``. ``cache_dir`` (default: the
    ``SIGNTENSOR_CACHE`` environment variable) stores per-level fits.
    """
    grid = LevelGrid(H)
    if len(samples) == 0:
        raise ValueError("empty sample set")
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    levels = grid.levels
    constants = [trivial_sign(samples, pi) for pi in levels]
    jobs = {}
    for j, pi in enumerate(levels):
        if constants[j] is None:
            level_cfg = cfg.replace(seed=level_seed(cfg.seed, j))
            cache = _LevelCache(cache_dir, samples, level_cfg) if cache_dir else None
            jobs[j] = (samples, float(pi), level_cfg, cache)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {j: pool.submit(_fit_one, *args) for j, args in jobs.items()}
            results = {j: fut.result() for j, fut in futures.items()}
    else:
        results = {j: _fit_one(*args) for j, args in jobs.items()}

    per_level, reports = [], []
    total = np.zeros(samples.dims)
    for j in range(len(levels)):
        if j in results:
            f, report = results[j]
            total += sign_of(cp_materialize(f))
        else:
            f, report = None, None
            total += constants[j]
        per_level.append(f)
        reports.append(report)
    log.debug("fitted %d of %d levels", len(jobs), len(levels))
    return SignSeriesEstimate(
        grid=grid,
        per_level=tuple(per_level),
        reports=tuple(reports),
        constant_signs=tuple(constants),
        aggregate=total / len(levels),
    )
