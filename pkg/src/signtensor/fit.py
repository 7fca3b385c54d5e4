"""Alternating minimisation of the weighted surrogate over CP factors.

One call to :func:`fit_level` estimates the classifier for a single level
``pi``. Each factor update is a convex problem (hinge, logistic) that is
separable across the rows of the factor, so each row runs its own
backtracking gradient descent. Every accepted step lowers its row's
objective, which makes every sweep monotone.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np

from .losses import SurrogateKind, level_weights, surrogate, surrogate_derivative
from .tensor_core import CpFactors, SampleSet, cp_frobenius_norm

log = logging.getLogger(__name__)


class FitDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    rank: int = 2
    surrogate: str = "logistic"
    max_sweeps: int = 50
    tol_rel: float = 1e-4
    n_starts: int = 5
    init_scale: float = 0.5
    inner_max_iter: int = 25
    max_halvings: int = 30
    armijo: float = 1e-4
    ridge: float = 1e-6
    renormalize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.tol_rel <= 0:
            raise ValueError("tol_rel must be positive")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        SurrogateKind(self.surrogate)

    def replace(self, **changes) -> "FitConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FitReport:
    objective: float
    sweeps: int
    trace: tuple
    start: int
    start_objectives: tuple = field(default=())


class _LevelProblem:
    """Zero-weight entries dropped, the rest in canonical order."""

    def __init__(self, samples: SampleSet, pi: float, kind):
        order = samples.canonical_order()
        w, labels = level_weights(samples.values[order], pi)
        keep = w > 0
        self.dims = samples.dims
        self.indices = samples.indices[order][keep]
        self.w = w[keep]
        self.labels = labels[keep]
        self.kind = SurrogateKind(kind)
        self._groups = {}

    def __len__(self):
        return self.w.size

    def groups(self, mode):
        """Observation order grouping rows of factor ``mode`` contiguously."""
        if mode not in self._groups:
            rows = self.indices[:, mode]
            order = np.argsort(rows, kind="stable")
            offsets = np.zeros(self.dims[mode] + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=self.dims[mode]), out=offsets[1:])
            self._groups[mode] = (order, offsets)
        return self._groups[mode]

    def products(self, factors, mode):
        prod = np.ones((len(self), factors[0].shape[1]))
        for j, m in enumerate(factors):
            if j != mode:
                prod *= m[self.indices[:, j]]
        return prod

    def objective(self, factors) -> float:
        prod = self.products(factors, -1)
        m = prod.sum(axis=1) * self.labels
        return float(np.dot(self.w, surrogate(m, self.kind)))


_KIND_CODES = {SurrogateKind.HINGE: 0, SurrogateKind.LOGISTIC: 1, SurrogateKind.PSI: 2}


@numba.njit(cache=True)
def _loss(m, code):
    if code == 0:
        return max(1.0 - m, 0.0)
    if code == 1:
        if m > 0:
            return np.log1p(np.exp(-m))
        return -m + np.log1p(np.exp(m))
    return 2.0 * min(1.0, max(1.0 - m, 0.0))


@numba.njit(cache=True)
def _dloss(m, code):
    if code == 0:
        return -1.0 if m < 1.0 else 0.0
    if code == 1:
        if m > 0:
            e = np.exp(-m)
            return -e / (1.0 + e)
        return -1.0 / (1.0 + np.exp(m))
    return -2.0 if 0.0 < m < 1.0 else 0.0


@numba.njit(cache=True)
def _row_objective(a, P, w, lab, lo, hi, code):
    total = 0.0
    for n in range(lo, hi):
        z = 0.0
        for s in range(a.size):
            z += a[s] * P[n, s]
        total += w[n] * _loss(z * lab[n], code)
    return total


@numba.njit(cache=True)
def _descend_rows(A, P, w, lab, offsets, code, max_iter, max_halvings, armijo, tol_rel):
    d, r = A.shape
    g = np.empty(r)
    trial = np.empty(r)
    for i in range(d):
        lo, hi = offsets[i], offsets[i + 1]
        if hi == lo:
            continue
        a = A[i].copy()
        curv = 0.0
        for n in range(lo, hi):
            for s in range(r):
                curv += w[n] * P[n, s] * P[n, s]
        step = 1.0 / max(curv, 1e-12)
        f = _row_objective(a, P, w, lab, lo, hi, code)
        if not np.isfinite(f):
            return False
        for _ in range(max_iter):
            g[:] = 0.0
            for n in range(lo, hi):
                z = 0.0
                for s in range(r):
                    z += a[s] * P[n, s]
                c = w[n] * _dloss(z * lab[n], code) * lab[n]
                for s in range(r):
                    g[s] += c * P[n, s]
            g2 = 0.0
            for s in range(r):
                g2 += g[s] * g[s]
            if g2 == 0.0:
                break
            t = step
            accepted = False
            ft = f
            for _ in range(max_halvings):
                for s in range(r):
                    trial[s] = a[s] - t * g[s]
                ft = _row_objective(trial, P, w, lab, lo, hi, code)
                if ft <= f - armijo * t * g2:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            a[:] = trial
            done = f - ft <= tol_rel * abs(f)
            f = ft
            step = 2.0 * t
            if done:
                break
        A[i] = a
    return True


def _descend(problem: _LevelProblem, factors, mode, cfg: FitConfig) -> np.ndarray:
    A = np.array(factors[mode], dtype=float)
    if len(problem) == 0:
        return A
    order, offsets = problem.groups(mode)
    prod = problem.products(factors, mode)[order]
    ok = _descend_rows(
        A, prod, problem.w[order], problem.labels[order], offsets,
        _KIND_CODES[problem.kind], cfg.inner_max_iter, cfg.max_halvings, cfg.armijo, cfg.tol_rel,
    )
    if not ok or not np.all(np.isfinite(A)):
        raise FloatingPointError("non-finite objective")
    return A


def update_factor(f: CpFactors, samples: SampleSet, pi: float, mode: int, cfg: FitConfig) -> np.ndarray:
    """Descend on factor ``mode`` with the other factors held fixed.

    The returned matrix never has a larger surrogate objective than the
    input factor.
    """
    if not 0 <= mode < f.ndim:
        raise ValueError(f"mode {mode} out of range")
    problem = _LevelProblem(samples, pi, cfg.surrogate)
    return _descend(problem, list(f.factors), mode, cfg)


def _single_start(problem: _LevelProblem, cfg: FitConfig, seed: int):
    rng = np.random.default_rng(seed)
    scale = cfg.init_scale / np.sqrt(cfg.rank)
    factors = [scale * rng.standard_normal((d, cfg.rank)) for d in problem.dims]
    obj = problem.objective(factors)
    trace = [obj]
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        for k in range(len(factors)):
            factors[k] = _descend(problem, factors, k, cfg)
        new = problem.objective(factors)
        if not np.isfinite(new):
            raise FloatingPointError("non-finite objective")
        trace.append(new)
        done = obj - new <= cfg.tol_rel * max(abs(obj), 1e-300)
        obj = new
        if done:
            break
    return factors, trace, sweeps


def fit_level(samples: SampleSet, pi: float, cfg: FitConfig) -> tuple[CpFactors, FitReport]:
    """Fit a rank-``cfg.rank`` classifier for level ``pi``.

    Start ``j`` is seeded with ``cfg.seed + j``; the start with the lowest
    final objective wins (earliest on ties).
    """
    if len(samples) == 0:
        raise ValueError("empty sample set")
    problem = _LevelProblem(samples, pi, cfg.surrogate)
    best = None
    objectives = []
    for j in range(cfg.n_starts):
        try:
            factors, trace, sweeps = _single_start(problem, cfg, cfg.seed + j)
        except FloatingPointError:
            log.warning("start %d at level %g diverged", j, pi)
            objectives.append(float("nan"))
            continue
        objectives.append(trace[-1])
        if best is None or trace[-1] < best[1][-1]:
            best = (factors, trace, sweeps, j)
    if best is None:
        raise FitDivergedError(f"all {cfg.n_starts} starts diverged at level {pi}")
    factors, trace, sweeps, j = best
    cp = CpFactors(tuple(factors))
    if cfg.renormalize:
        norm = cp_frobenius_norm(cp)
        if norm > 0:
            cp = cp.replace(cp.ndim - 1, cp.factors[-1] / norm)
    report = FitReport(float(trace[-1]), sweeps, tuple(float(v) for v in trace), j, tuple(objectives))
    return cp, report
