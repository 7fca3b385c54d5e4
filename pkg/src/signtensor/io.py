"""Text formats: COO observations, CP factor files and estimate directories.

COO files hold one observation per line, ``i1 i2 ... iK value`` with 0-based
indices, after a ``dims d1 ... dK`` header. ``#`` starts a comment.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .losses import LevelGrid
from .sign_series import SignSeriesEstimate
from .tensor_core import CpFactors, SampleSet


class CooFormatError(ValueError):
    def __init__(self, line_no, message, path=None):
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_no}: {message}")
        self.line_no = line_no


def _lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def parse_coo(text: str, path=None, check_range: bool = True):
    """Parse COO text into ``(dims, indices, values)``."""
    dims = None
    idx, vals = [], []
    for no, tok in _lines(text):
        if dims is None:
            if tok[0] != "dims":
                raise CooFormatError(no, "expected 'dims d1 ... dK' header", path)
            try:
                dims = tuple(int(t) for t in tok[1:])
            except ValueError:
                raise CooFormatError(no, "dimensions must be integers", path) from None
            if len(dims) < 2 or any(d < 1 for d in dims):
                raise CooFormatError(no, f"invalid dims {dims}", path)
            continue
        if len(tok) != len(dims) + 1:
            raise CooFormatError(no, f"expected {len(dims)} indices and a value, got {len(tok)} fields", path)
        try:
            ii = [int(t) for t in tok[:-1]]
            v = float(tok[-1])
        except ValueError:
            raise CooFormatError(no, f"cannot parse {' '.join(tok)!r}", path) from None
        if any(not 0 <= i < d for i, d in zip(ii, dims)):
            raise CooFormatError(no, f"index {tuple(ii)} out of bounds for dims {dims}", path)
        if not np.isfinite(v):
            raise CooFormatError(no, "value is not finite", path)
        if check_range and not -1.0 <= v <= 1.0:
            raise CooFormatError(no, f"value {v} outside [-1, 1]", path)
        idx.append(ii)
        vals.append(v)
    if dims is None:
        raise CooFormatError(0, "missing 'dims' header", path)
    indices = np.array(idx, dtype=np.int64).reshape(-1, len(dims))
    return dims, indices, np.array(vals, dtype=float)


def read_coo(path, check_range: bool = True) -> SampleSet:
    dims, idx, vals = parse_coo(Path(path).read_text(), path=path, check_range=check_range)
    return SampleSet(dims, idx, vals)


def format_coo(dims, indices, values, comment=None) -> str:
    out = []
    if comment:
        out.extend(f"# {c}" for c in comment.splitlines())
    out.append("dims " + " ".join(str(int(d)) for d in dims))
    for ii, v in zip(np.asarray(indices), np.asarray(values, dtype=float)):
        out.append(" ".join(str(int(i)) for i in ii) + " " + repr(float(v)))
    return "\n".join(out) + "\n"


def write_coo(path, samples: SampleSet, comment=None):
    Path(path).write_text(format_coo(samples.dims, samples.indices, samples.values, comment))


def write_dense_coo(path, tensor, comment=None):
    tensor = np.asarray(tensor, dtype=float)
    idx = np.indices(tensor.shape).reshape(tensor.ndim, -1).T
    Path(path).write_text(format_coo(tensor.shape, idx, tensor.ravel(), comment))


def read_dense_coo(path) -> np.ndarray:
    """Dense tensor from a COO file; every entry must appear at least once.

    Repeated entries are averaged.
    """
    dims, idx, vals = parse_coo(Path(path).read_text(), path=path, check_range=False)
    flat = np.ravel_multi_index(tuple(idx.T), dims) if idx.size else np.empty(0, dtype=np.int64)
    size = int(np.prod(dims))
    counts = np.bincount(flat, minlength=size)
    if np.any(counts == 0):
        raise ValueError(f"{path}: {int(np.sum(counts == 0))} entries missing from dense tensor")
    return (np.bincount(flat, weights=vals, minlength=size) / counts).reshape(dims)


def format_factors(f: CpFactors) -> str:
    """Factor matrices as text: header lines, then ``mode row column value``."""
    out = [f"rank {f.rank}", "dims " + " ".join(str(d) for d in f.dims)]
    for k, m in enumerate(f.factors):
        for i in range(m.shape[0]):
            for s in range(m.shape[1]):
                out.append(f"{k} {i} {s} {float(m[i, s])!r}")
    return "\n".join(out) + "\n"


def parse_factors(text: str, path=None) -> CpFactors:
    rank = dims = None
    mats = None
    for no, tok in _lines(text):
        if tok[0] == "rank":
            rank = int(tok[1])
        elif tok[0] == "dims":
            dims = [int(t) for t in tok[1:]]
        else:
            if rank is None or dims is None:
                raise CooFormatError(no, "factor entries before 'rank'/'dims' header", path)
            if mats is None:
                mats = [np.full((d, rank), np.nan) for d in dims]
            try:
                k, i, s = (int(t) for t in tok[:3])
                mats[k][i, s] = float(tok[3])
            except (ValueError, IndexError):
                raise CooFormatError(no, f"bad factor entry {' '.join(tok)!r}", path) from None
    if mats is None or any(np.isnan(m).any() for m in mats):
        raise CooFormatError(0, "incomplete factor file", path)
    return CpFactors(tuple(mats))


def save_estimate(est: SignSeriesEstimate, out_dir, extra_grid=None):
    """Write ``grid.json``, ``level_<j>.coofactors`` and ``aggregate.coo``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = {
        "H": est.grid.H,
        "levels": [float(v) for v in est.grid.levels],
        "constant_signs": [c for c in est.constant_signs],
    }
    if extra_grid:
        grid.update(extra_grid)
    (out / "grid.json").write_text(json.dumps(grid, indent=2) + "\n")
    for j, f in enumerate(est.per_level):
        if f is not None:
            (out / f"level_{j}.coofactors").write_text(format_factors(f))
    write_dense_coo(out / "aggregate.coo", est.aggregate)


def load_estimate(out_dir) -> SignSeriesEstimate:
    out = Path(out_dir)
    grid = json.loads((out / "grid.json").read_text())
    H = int(grid["H"])
    per_level = []
    for j in range(2 * H + 1):
        path = out / f"level_{j}.coofactors"
        per_level.append(parse_factors(path.read_text(), path) if path.exists() else None)
    return SignSeriesEstimate(
        grid=LevelGrid(H),
        per_level=tuple(per_level),
        reports=(None,) * len(per_level),
        constant_signs=tuple(grid.get("constant_signs", [None] * len(per_level))),
        aggregate=read_dense_coo(out / "aggregate.coo"),
    )
