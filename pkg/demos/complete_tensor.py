"""Complete a noisy, partially observed block tensor.

Compares the sign-series estimate against a low-rank CP least-squares
fit of the same rank and the observed mean.
"""
import time

import numpy as np

from signtensor import FitConfig, SimSpec, cp_als, estimate, mae, naive_impute
from signtensor.baselines import cp_als_predict
from signtensor.simgen import simulate

spec = SimSpec(model=1, d=15, noise="gaussian", noise_scale=0.1, seed=3)
theta, _, samples = simulate(spec, fraction=0.6)
print(f"observed {len(samples)} draws of a {spec.d}^3 tensor")

cfg = FitConfig(rank=4, n_starts=3, seed=1)

t0 = time.perf_counter()
est = estimate(samples, cfg, H=10)
print(f"sign series   MAE {mae(est.aggregate, theta):.4f}  ({time.perf_counter() - t0:.1f}s)")
print(f"  levels fitted: {sum(f is not None for f in est.per_level)} of {len(est.per_level)}")

cp = cp_als_predict(cp_als(samples, cfg.rank, cfg))
print(f"CP least sq.  MAE {mae(cp, theta):.4f}")
print(f"observed mean MAE {mae(np.full(theta.shape, naive_impute(samples)), theta):.4f}")
