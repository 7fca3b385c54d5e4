"""``signtensor`` command line: gen, fit, eval, cv and reproduce.

Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import evaluation, io
from .fit import FitConfig
from .sign_series import auto_H, estimate
from .simgen import SimSpec, add_noise, apply_mask, gen_signal
from .tensor_core import SampleSet, mae

log = logging.getLogger("signtensor")

FIT_DEFAULTS = dict(FitConfig().to_dict(), H=20, auto_H=False, threads=None)


class UsageError(Exception):
    pass


def _tensor_hash(t) -> str:
    t = np.ascontiguousarray(t, dtype=float)
    h = hashlib.sha256(np.asarray(t.shape, dtype=np.int64).tobytes())
    h.update(t.tobytes())
    return h.hexdigest()


def _add_fit_options(p):
    p.add_argument("--config", help="JSON file of fit settings")
    p.add_argument("--rank", type=int)
    p.add_argument("--H", type=int, dest="H")
    p.add_argument("--auto-H", action="store_true", default=None, dest="auto_H",
                   help="H = round(sqrt(n / (d_max * rank)))")
    p.add_argument("--surrogate", choices=["hinge", "logistic", "psi"])
    p.add_argument("--n-starts", type=int, dest="n_starts")
    p.add_argument("--max-sweeps", type=int, dest="max_sweeps")
    p.add_argument("--tol", type=float, dest="tol_rel")
    p.add_argument("--init-scale", type=float, dest="init_scale")
    p.add_argument("--renormalize", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def _settings(args) -> dict:
    """Built-in defaults, overridden by --config, overridden by flags."""
    out = dict(FIT_DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(cfg) - set(out)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        out.update(cfg)
    for key in out:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if out["threads"] is None:
        out["threads"] = os.cpu_count() or 1
    return out


def _fit_config(settings) -> FitConfig:
    fields = FitConfig().to_dict().keys()
    return FitConfig(**{k: settings[k] for k in fields})


def _read_input(args):
    check = not args.rescale
    samples = io.read_coo(args.input, check_range=check and not args.binary01)
    transform = None
    if args.binary01:
        if not np.all(np.isin(samples.values, (0.0, 1.0))):
            raise UsageError(f"{args.input}: --binary01 needs values in {{0, 1}}")
        transform = {"kind": "affine", "scale": 2.0, "shift": -1.0}
    elif args.rescale:
        lo, hi = float(samples.values.min()), float(samples.values.max())
        if hi == lo:
            raise UsageError(f"{args.input}: cannot rescale constant data")
        transform = {"kind": "affine", "scale": 2.0 / (hi - lo), "shift": -1.0 - 2.0 * lo / (hi - lo)}
    if transform:
        vals = np.clip(samples.values * transform["scale"] + transform["shift"], -1.0, 1.0)
        samples = SampleSet(samples.dims, samples.indices, vals)
    return samples, transform


def cmd_fit(args) -> int:
    settings = _settings(args)
    samples, transform = _read_input(args)
    cfg = _fit_config(settings)
    H = auto_H(len(samples), samples.dims, cfg.rank) if settings["auto_H"] else int(settings["H"])
    t0 = time.perf_counter()
    est = estimate(samples, cfg, H, workers=settings["threads"])
    wall = time.perf_counter() - t0
    if transform:
        est = type(est)(est.grid, est.per_level, est.reports, est.constant_signs,
                        (est.aggregate - transform["shift"]) / transform["scale"])
    io.save_estimate(est, args.out, extra_grid={"output_transform": transform})
    summary = {
        "input": str(args.input),
        "n_observations": len(samples),
        "dims": list(samples.dims),
        "H": H,
        "settings": dict(settings, H=H),
        "wall_seconds": wall,
        "levels": [
            {"level": float(pi), "constant_sign": c,
             "objective_trace": list(r.trace) if r else None,
             "start": r.start if r else None}
            for pi, c, r in zip(est.grid.levels, est.constant_signs, est.reports)
        ],
    }
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"fitted {len(samples)} observations, H={H}, {wall:.1f}s -> {args.out}")
    return 0


def cmd_gen(args) -> int:
    spec = SimSpec(model=args.model, d=args.d, noise=args.noise, noise_scale=args.noise_scale,
                   seed=args.seed, c=args.c, variant=args.variant)
    theta = gen_signal(spec)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(2)]
    y, rate = add_noise(theta, spec.noise, spec.noise_scale, seeds[0], clip=not args.no_clip,
                        return_clip_rate=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_dense_coo(out / "theta.coo", theta)
    if args.no_clip:
        yb = np.asarray(y)
        idx = np.indices(yb.shape).reshape(yb.ndim, -1).T
        rng = np.random.default_rng(seeds[1])
        n = int(round(args.fraction * yb.size))
        flat = rng.integers(0, yb.size, size=max(n, 1))
        (out / "y.coo").write_text(io.format_coo(yb.shape, idx[flat], yb.ravel()[flat]))
    else:
        io.write_coo(out / "y.coo", apply_mask(y, args.fraction, seed=seeds[1]))
    sidecar = {"spec": asdict(spec), "fraction": args.fraction, "clip": not args.no_clip,
               "clip_rate": rate, "theta_sha256": _tensor_hash(theta)}
    (out / "spec.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'theta.coo'} and {out / 'y.coo'}")
    return 0


def cmd_eval(args) -> int:
    est = io.load_estimate(args.est)
    truth = io.read_dense_coo(args.truth)
    print(f"MAE {mae(est.aggregate, truth)!r}")
    return 0


def cmd_cv(args) -> int:
    settings = _settings(args)
    samples, _ = _read_input(args)
    cfg = _fit_config(settings)
    rows = evaluation.cross_validate(samples, args.folds, args.ranks, int(settings["H"]), cfg)
    evaluation.write_csv(rows, args.out_csv or sys.stdout, fields=("r", "fold", "method", "mae"))
    return 0


def cmd_reproduce(args) -> int:
    settings = _settings(args)
    cfg = _fit_config(settings)
    out = args.out_csv or sys.stdout
    if args.figure == "fig1a":
        rows = evaluation.run_figure1a(d=args.d[0], c_values=args.c, seeds=range(args.reps))
        evaluation.write_csv(rows, out, fields=("c", "seed", "d", "numerical_rank"))
        return 0
    H = settings["H"] if args.H is not None or args.config else None
    if args.figure == "fig3":
        rows = evaluation.run_figure3(args.d, args.models, args.reps, cfg, methods=args.methods,
                                      noise_scale=args.noise_scale, H=H, seed=cfg.seed,
                                      workers=settings["threads"])
    else:
        rows = evaluation.run_figure4(args.fractions, args.models, args.reps, cfg, d=args.d[0],
                                      methods=args.methods, noise_scale=args.noise_scale, H=H,
                                      seed=cfg.seed, workers=settings["threads"])
    evaluation.write_csv(rows, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signtensor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate a signal tensor from COO observations")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--binary01", action="store_true", help="map {0,1} data to {-1,1} and back")
    p.add_argument("--rescale", action="store_true", help="map the data range to [-1,1] and back")
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gen", help="simulate a signal and noisy observations")
    p.add_argument("--model", type=int, required=True, choices=[1, 2, 3, 4])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="gaussian", choices=["gaussian", "uniform", "binary"])
    p.add_argument("--noise-scale", type=float, default=0.1)
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--c", type=float, default=5.0, help="transform sharpness for model 2")
    p.add_argument("--variant", default="max", choices=["max", "min"])
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="MAE of a saved estimate against a dense truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="cross-validated held-out MAE")
    p.add_argument("--input", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--ranks", type=int, nargs="+", default=[3, 6, 9, 12, 15])
    p.add_argument("--binary01", action="store_true")
    p.add_argument("--rescale", action="store_true")
    p.add_argument("--out-csv")
    _add_fit_options(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("reproduce", help="desk-scale simulation experiments as CSV")
    p.add_argument("figure", choices=["fig1a", "fig3", "fig4"])
    p.add_argument("--d", type=int, nargs="+", default=[20])
    p.add_argument("--models", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--fractions", type=float, nargs="+", default=[0.3, 0.6, 1.0])
    p.add_argument("--methods", nargs="+", default=list(evaluation.METHODS))
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--noise-scale", type=float, default=0.1)
    p.add_argument("--c", type=float, nargs="+", default=[1, 2, 5, 10])
    p.add_argument("--out-csv")
    _add_fit_options(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, io.CooFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
