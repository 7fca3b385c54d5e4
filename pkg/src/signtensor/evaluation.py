"""Numerical rank, cross-validation and the simulation experiment runners."""
from __future__ import annotations

import csv
import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import cp_als, cp_als_predict, naive_impute, nonpara_matrix
from .fit import FitConfig
from .sign_series import estimate
from .simgen import SimSpec, logistic_transform_experiment, simulate
from .tensor_core import SampleSet, mae

log = logging.getLogger(__name__)

CSV_FIELDS = ("model", "d", "fraction", "method", "r", "H", "rep", "mae", "seconds")
METHODS = ("NonParaT", "CPT", "NonParaM")


# --- numerical rank -------------------------------------------------------

def _khatri_rao(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.einsum("ir,jr->ijr", out, m).reshape(-1, out.shape[1])
    return out


def cp_als_dense(tensor, rank: int, n_starts: int = 3, seed: int = 0,
                 max_iter: int = 500, tol: float = 1e-9) -> float:
    """Best relative Frobenius residual of a rank-``rank`` ALS fit over restarts."""
    tensor = np.asarray(tensor, dtype=float)
    K = tensor.ndim
    norm = np.linalg.norm(tensor)
    best = np.inf
    for j in range(n_starts):
        rng = np.random.default_rng(seed + j)
        factors = [rng.standard_normal((d, rank)) for d in tensor.shape]
        prev = np.inf
        for _ in range(max_iter):
            for k in range(K):
                others = [factors[i] for i in range(K) if i != k]
                # C-order unfolding: remaining modes with the last varying fastest
                unf = np.moveaxis(tensor, k, 0).reshape(tensor.shape[k], -1)
                kr = _khatri_rao(others)
                gram = np.ones((rank, rank))
                for m in others:
                    gram *= m.T @ m
                factors[k] = np.linalg.solve(gram + 1e-12 * np.eye(rank), (unf @ kr).T).T
            approx = np.einsum("ir,jr,kr->ijk", *factors) if K == 3 else _dense(factors)
            res = np.linalg.norm(tensor - approx) / norm
            converged = prev - res <= tol * res
            prev = res
            if converged:
                break
        best = min(best, prev)
    return float(best)


def _dense(factors):
    kr = _khatri_rao(factors[1:])
    return (factors[0] @ kr.T).reshape([f.shape[0] for f in factors])


def numerical_rank(theta, rel_tol: float = 0.1, r_max: int = 50, n_starts: int = 3, seed: int = 0) -> int:
    """Smallest rank whose ALS approximation has relative error <= ``rel_tol``.

    ALS only approximates the best rank-s fit, so the result is an upper
    bound on the true numerical rank. Returns ``r_max + 1`` when no rank up
    to ``r_max`` reaches the tolerance.
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must be in (0, 1)")
    theta = np.asarray(theta, dtype=float)
    if not np.any(theta):
        raise ValueError("numerical rank of the zero tensor is undefined")
    for s in range(1, r_max + 1):
        if cp_als_dense(theta, s, n_starts=n_starts, seed=seed) <= rel_tol:
            return s
    return r_max + 1


# --- cross-validation -----------------------------------------------------

def fold_assignment(samples: SampleSet, folds: int, seed: int = 0) -> np.ndarray:
    """Fold of every entry, keyed by a hash of its index and value."""
    out = np.empty(len(samples), dtype=np.int64)
    salt = int(seed).to_bytes(8, "little", signed=True)
    for n in range(len(samples)):
        h = hashlib.blake2b(salt, digest_size=8)
        h.update(samples.indices[n].tobytes())
        h.update(samples.values[n].tobytes())
        out[n] = int.from_bytes(h.digest(), "little") % folds
    return out


def cross_validate(samples: SampleSet, folds: int, r_grid, H: int, cfg: FitConfig,
                   methods=("NonParaT", "CPT", "naive")) -> list:
    """Held-out MAE per (r, fold, method).

    Rows are dicts with keys ``r, fold, method, mae``. The naive method does
    not depend on ``r`` and is repeated for every rank.
    """
    if folds < 2:
        raise ValueError("need at least two folds")
    assign = fold_assignment(samples, folds, cfg.seed)
    rows = []
    for r in r_grid:
        rcfg = cfg.replace(rank=int(r))
        for k in range(folds):
            test = assign == k
            if test.sum() == 0 or (~test).sum() == 0:
                raise ValueError(f"fold {k} is too small")
            train, held = samples.subset(~test), samples.subset(test)
            idx = tuple(held.indices.T)
            for method in methods:
                if method == "NonParaT":
                    pred = estimate(train, rcfg, H).aggregate[idx]
                elif method == "CPT":
                    pred = cp_als_predict(cp_als(train, int(r), rcfg))[idx]
                elif method == "naive":
                    pred = np.full(len(held), naive_impute(train))
                else:
                    raise ValueError(f"unknown method {method!r}")
                rows.append({"r": int(r), "fold": k, "method": method,
                             "mae": float(np.mean(np.abs(pred - held.values)))})
    return rows


# --- simulation experiments -----------------------------------------------

def default_H(d: int) -> int:
    """Resolution used in the simulations: ``10 + (d - 15) / 5``."""
    return int(10 + (d - 15) // 5)


def _run_methods(theta, samples, cfg, H, methods):
    out = {}
    for method in methods:
        t0 = time.perf_counter()
        if method == "NonParaT":
            err = mae(estimate(samples, cfg, H).aggregate, theta)
        elif method == "CPT":
            err = mae(cp_als_predict(cp_als(samples, cfg.rank, cfg)), theta)
        elif method == "NonParaM":
            err = float(np.mean([mae(e, theta) for e in nonpara_matrix(samples, cfg, H)]))
        else:
            raise ValueError(f"unknown method {method!r}")
        out[method] = (err, time.perf_counter() - t0)
    return out


def _cell(model, d, fraction, rep, full, cfg, methods, noise, noise_scale, H, base_seed):
    # fraction is left out of the seed so masks are nested across fractions
    seed = int(np.random.SeedSequence([base_seed, model, d, rep])
               .generate_state(1)[0])
    spec = SimSpec(model=model, d=d, noise=noise, noise_scale=noise_scale, seed=seed)
    if full:
        theta, y, _ = simulate(spec)
        samples = SampleSet.from_dense(y)
    else:
        theta, _, samples = simulate(spec, fraction)
    H = H if H is not None else default_H(d)
    rcfg = cfg.replace(seed=seed)
    rows = []
    for method, (err, secs) in _run_methods(theta, samples, rcfg, H, methods).items():
        rows.append({"model": model, "d": d, "fraction": fraction, "method": method,
                     "r": cfg.rank, "H": H, "rep": rep, "mae": err, "seconds": secs})
    return rows


def _run_grid(cells, cfg, methods, noise, noise_scale, H, seed, workers):
    def job(c):
        return _cell(*c, cfg, methods, noise, noise_scale, H, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, cells))
    else:
        chunks = [job(c) for c in cells]
    return [row for chunk in chunks for row in chunk]


def run_figure3(d_list, models, reps: int, cfg: FitConfig, methods=METHODS, noise="gaussian",
                noise_scale=0.1, H=None, seed=0, workers=1) -> list:
    """MAE versus dimension under full observation (each entry seen once)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cells = [(m, d, 1.0, rep, True) for m in models for d in d_list for rep in range(reps)]
    return _run_grid(cells, cfg, methods, noise, noise_scale, H, seed, workers)


def run_figure4(fractions, models, reps: int, cfg: FitConfig, d: int = 20, methods=METHODS,
                noise="gaussian", noise_scale=0.1, H=None, seed=0, workers=1) -> list:
    """MAE versus observation fraction (entries drawn with replacement)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cells = [(m, d, float(f), rep, False) for m in models for f in fractions for rep in range(reps)]
    return _run_grid(cells, cfg, methods, noise, noise_scale, H, seed, workers)


def run_figure1a(d: int = 20, c_values=(1, 2, 5, 10), seeds=range(5), rel_tol=0.1,
                 r_max: int = 50, n_starts: int = 3) -> list:
    """Numerical rank of the logistic transform of a rank-3 tensor, per ``c``."""
    rows = []
    for c in c_values:
        for s in seeds:
            theta = logistic_transform_experiment(d, c, s)
            rows.append({"c": c, "seed": s, "d": d,
                         "numerical_rank": numerical_rank(theta, rel_tol, r_max, n_starts, seed=s)})
    return rows


def summarize(rows, keys=("model", "d", "fraction", "method")) -> list:
    """Mean and standard error of ``mae`` per group."""
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row["mae"])
    out = []
    for key, vals in sorted(groups.items()):
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        out.append(dict(zip(keys, key), mean=float(v.mean()), se=se, n=int(v.size)))
    return out


def write_csv(rows, path_or_file, fields=CSV_FIELDS):
    close = False
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        path_or_file = open(path_or_file, "w", newline="")
        close = True
    try:
        writer = csv.DictWriter(path_or_file, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if close:
            path_or_file.close()
