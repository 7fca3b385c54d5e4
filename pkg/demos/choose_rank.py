"""Pick the rank by cross-validated held-out error."""
from signtensor import FitConfig
from signtensor.evaluation import cross_validate, summarize
from signtensor.simgen import SimSpec, simulate

theta, _, samples = simulate(SimSpec(model=3, d=10, seed=0), fraction=0.8)
rows = cross_validate(samples, folds=3, r_grid=[1, 2, 3], H=6,
                      cfg=FitConfig(n_starts=2), methods=("NonParaT", "CPT"))
for s in summarize(rows, keys=("method", "r")):
    print(f"{s['method']:9s} r={s['r']}  held-out MAE {s['mean']:.4f} +/- {s['se']:.4f}")
