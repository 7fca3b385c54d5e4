"""High-rank tensors whose level sets have low rank.

The banded matrix |i - j| has full rank, yet each of its level sets is the
sign pattern of a rank-2 matrix. Sharpening a logistic transform of a
rank-3 tensor quickly drives up its numerical rank while leaving its
level sets alone.
"""
import numpy as np

from signtensor.evaluation import numerical_rank
from signtensor.simgen import banded_threshold, banded_witness, logistic_transform_experiment

d = 12
M, A = banded_witness(d)
print("rank of |i-j|:", np.linalg.matrix_rank(M))
print("rank of the witness:", np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A, 2)))
matches = [np.array_equal(A >= banded_threshold(d, pi), M >= pi) for pi in np.arange(0.5, d - 1, 1.0)]
print(f"level sets matched: {sum(matches)} of {len(matches)}")

for c in (1, 5, 10):
    theta = logistic_transform_experiment(d, c, seed=0)
    print(f"c={c:2d}  numerical rank {numerical_rank(theta, 0.1, r_max=30, n_starts=2)}")
