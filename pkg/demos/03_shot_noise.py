"""
Finite-shot sampling
====================

The shot backend draws whole trajectories, with one measure-and-reset per step.
It does this for 900,000 shots and decodes the final position histogram.
The error is compared against the binomial standard error of each cell.
"""

# %%
import time

import numpy as np

from qlbm.lattice import GaussianParams, initial_gaussian
from qlbm.qlbm_linear import LinearRunConfig, run_linear

rho0 = initial_gaussian(GaussianParams(), 32)
exact = run_linear(LinearRunConfig(steps=20, u=0.3), rho0).final

# %%
for shots in (10_000, 100_000, 900_000):
    t0 = time.perf_counter()
    res = run_linear(LinearRunConfig(steps=20, u=0.3, backend="shots", shots=shots, seed=1), rho0)
    dt = time.perf_counter() - t0
    z = np.abs(res.final - exact) / np.maximum(res.stderr[20], 1e-300)
    rel = np.linalg.norm(res.final - exact) / np.linalg.norm(exact)
    print(f"{shots:>8d} shots: L2 rel {rel:.4f}  max z {z.max():.2f}  ({dt:.2f} s)")

# %%
# The error shrinks like 1/sqrt(shots); a per-row sampler gives the same law.
res = run_linear(LinearRunConfig(M=3, steps=5, u=0.2, backend="shots", shots=20_000, seed=3,
                                 sampler="rows"), rho0[::4])
print("rows sampler, 8 cells:", np.round(res.final, 4))
