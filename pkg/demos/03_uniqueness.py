"""
When is the unshuffled signal unique?
=====================================

With M = 2 channels and a generic N x K sensing matrix, a shuffle that moves
r sample indices leaves the signal identifiable exactly when
K <= max(r, N - r). We check that rule on small random matrices and look at
an ambiguous pair when it fails.
"""

import numpy as np

from sssr.shuffle import random_assignment
from sssr.theory import (
    cauchy_logdet,
    converse_witness,
    idft_vandermonde,
    is_generic,
    proposition1_sweep,
    random_generic_matrix,
)

N = 6
for K in (2, 4):
    for row in proposition1_sweep(N, K, seed=0, n_matrices=5):
        verdict = "unique" if row.expected_unique else "ambiguous"
        print(f"K={K} r={row.r}: expected {verdict:9s} agrees on all matrices: {row.matches}")

# Past the threshold a second signal explains the same shuffled samples.
E = random_generic_matrix(N, 4, np.random.default_rng(1))
pair = converse_witness(E, random_assignment(2, N, 3, seed=2), seed=3)
print(f"\nambiguous pair: residual {pair.residual:.1e}, separation {pair.separation:.2f}")

# Sampled exponential atoms give such generic matrices; every K x K minor
# is a Cauchy-type determinant with a closed form.
v = np.exp(-0.2 + 2j * np.pi * np.array([0.1, 0.4, 0.7]))
print("generic:", is_generic(idft_vandermonde(v, 9)).is_generic)
rows = [0, 4, 7]
print("closed form:", np.exp(cauchy_logdet(rows, v, 9)))
print("direct:     ", np.linalg.det(idft_vandermonde(v, 9, rows)))
