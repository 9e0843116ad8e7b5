"""
Multivariate normal points
==========================

Points y = A^T x + mu with a random upper-triangular A.  Standard MC needs
one s x s product per point; TMC slides a window over one stream, so the
whole batch is a Toeplitz product.  The gap grows with s.
"""

import time

import numpy as np

from toeplitz_mc import generate_mvn, random_upper_factor
from toeplitz_mc.sampling import TriangularFactor

for s in (256, 512, 1024):
    factor = random_upper_factor(s, seed=3)
    mu = np.zeros(s)
    times = {}
    for method in ("MC", "TMC"):
        generate_mvn(method, mu, factor, 8, 0)  # warm caches
        t0 = time.perf_counter()
        Y = generate_mvn(method, mu, factor, s, 1)
        times[method] = time.perf_counter() - t0
    print(f"s = N = {s:5d}   MC {times['MC']:.3f}s   TMC {times['TMC']:.3f}s   ratio {times['MC'] / times['TMC']:.1f}")

# both give the right covariance; here a 2 x 2 check with many points
A = np.array([[1.0, 1.0], [0.0, 1.0]])
Y = generate_mvn("TMC", np.zeros(2), TriangularFactor(A), 100000, 7)
print("sample covariance\n", np.cov(Y.T).round(3), "\nexpected\n", A.T @ A)
