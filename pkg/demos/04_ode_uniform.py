"""
1D diffusion with a uniform random coefficient
==============================================

-(a u')' = 1 on (0, 1) with a = 2 + sum_j y_j sin(2 pi j x) / j^{3/2}.
Every stiffness entry is affine in y, so the MC and TMC estimators only
differ in how the N x s matrix of y's times the term coefficients is formed.
"""

import numpy as np

from toeplitz_mc.estimators import efficiency, replicate
from toeplitz_mc.fem1d import estimate_u_half, solve_u_half_uniform
from toeplitz_mc.sampling import Law

# deterministic field a = 2: the nodal solution is exact, u(1/2) = 1/16
print("u(1/2) at y = 0:", solve_u_half_uniform(np.zeros(4), 64))

print(f"{'N=M=s':>6} {'MC mean':>9} {'MC var':>9} {'TMC mean':>9} {'TMC var':>9} {'eff':>6}")
for n in (64, 256, 512):
    st = {m: replicate(lambda seed, idx: estimate_u_half("uniform", m, n, n, n, seed, idx), 25, 11)
          for m in ("MC", "TMC")}
    print(f"{n:6d} {st['MC'].grand_mean:9.5f} {st['MC'].estimator_variance:9.2e} "
          f"{st['TMC'].grand_mean:9.5f} {st['TMC'].estimator_variance:9.2e} {efficiency(st['MC'], st['TMC']):6.2f}")

# y ~ U(0, 1) instead of U(-1/2, 1/2) shifts the mean field and the answer
r = estimate_u_half("uniform", "TMC", 1024, 256, 256, 2, 0, Law.UNIFORM)
print(f"with y ~ U(0,1): {r.value:.5f}")
