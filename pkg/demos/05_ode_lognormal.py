"""
1D diffusion with a log-normal coefficient
==========================================

a = exp(theta) with theta(x) = sum_j y_j sin(2 pi j x) / j^2 and standard
normal y_j.  theta is needed at every mesh node for every sample, which is
one N x s by s x (M+1) product: the TMC path does it with FFTs.
The stiffness matrix is assembled with Simpson's rule on the diagonal and
the trapezoid rule off it.
"""

import numpy as np

from toeplitz_mc.estimators import replicate
from toeplitz_mc.fem1d import assemble_lognormal, compute_thetas, estimate_u_half, solve_u_half_lognormal
from toeplitz_mc.sampling import Law, make_stream

print("u(1/2) at theta = 0:", solve_u_half_lognormal(np.zeros(65), 64))

for n in (64, 256):
    st = {m: replicate(lambda seed, idx: estimate_u_half("lognormal", m, n, n, n, seed, idx), 25, 5)
          for m in ("MC", "TMC")}
    gap = abs(st["MC"].grand_mean - st["TMC"].grand_mean)
    sd = np.sqrt(st["MC"].estimator_variance + st["TMC"].estimator_variance)
    print(f"N=M=s={n}: MC {st['MC'].grand_mean:.4f}  TMC {st['TMC'].grand_mean:.4f}  gap/sd {gap / sd:.2f}")

# The mixed quadrature does not guarantee a definite matrix.  On fine
# meshes a few samples in 10^4 give an indefinite system, and u(1/2) then
# takes extreme values, so the distribution grows heavy tails with M.
for M in (8, 32, 64):
    nodes = np.arange(M + 1) / M
    theta = compute_thetas(make_stream(3, 0, Law.NORMAL, 20000 * M), 20000, M, nodes, method="MC")
    u = np.array([solve_u_half_lognormal(t, M) for t in theta])
    smallest = min(np.linalg.eigvalsh(assemble_lognormal(t, M).to_dense())[0] for t in theta[np.argsort(u)[:3]])
    print(f"M={M:3d}: median {np.median(u):.4f}  std {u.std():.4f}  "
          f"min {u.min():.3f}  max {u.max():.3f}  smallest eigenvalue seen {smallest:.3g}")
