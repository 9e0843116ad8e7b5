"""
2D diffusion on the unit square
===============================

-div(a grad u) = 100 x_1 with a = 1 + sum_j y_j sin(pi k1 x1) sin(pi k2 x2) / (k1^2 + k2^2)^2.
Linear elements on a uniform triangle mesh; each interior hat function is
supported on a hexagon, so the stiffness matrix has seven bands.  Systems
are solved with unpreconditioned BiCGSTAB.
"""

import numpy as np

from toeplitz_mc.estimators import efficiency, replicate
from toeplitz_mc.fem2d import assemble_2d, bicgstab, estimate_center, frequency_ordering, solve_center

print("first frequencies:", [tuple(int(k) for k in p) for p in frequency_ordering(8).pairs])

# with y = 0 the center value converges to 50 * 0.0736713 = 3.68357
for M in (8, 16, 32, 64):
    print(f"M={M:3d}  u(1/2,1/2) = {solve_center(np.zeros(1), M):.5f}")

sys = assemble_2d(np.random.default_rng(0).uniform(-0.5, 0.5, 16), 16)
sol = bicgstab(sys)
print(f"one random solve: {sol.iterations} iterations, relative residual {sol.residual:.1e}")

# MC vs TMC on the N = M^2 = s ladder
for N, M in ((64, 8), (256, 16)):
    st = {m: replicate(lambda seed, idx: estimate_center(m, N, M, N, seed, idx), 10, 1) for m in ("MC", "TMC")}
    print(f"N={N:4d} M={M:3d}: MC {st['MC'].grand_mean:.4f}  TMC {st['TMC'].grand_mean:.4f}  "
          f"efficiency {efficiency(st['MC'], st['TMC']):.2f}")
