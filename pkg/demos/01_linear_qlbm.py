"""
Linear-equilibrium quantum LBM on a Gaussian hill
=================================================

A 32-cell periodic domain holds a Gaussian hill on an ambient density.
It is advected at u = 0.3 for 20 steps by the two-f-qubit circuit.
The result is compared against the classical D1Q3 solver and the analytical solution.
"""

# %%
import numpy as np

from qlbm.lattice import GaussianParams, analytic_gaussian, classical_run, initial_gaussian
from qlbm.qlbm_linear import LinearRunConfig, linear_angles, run_linear

p = GaussianParams()  # rho0 = 0.1, ambient 0.1, x0 = 16, sigma0 = 4, D = 1/6
rho0 = initial_gaussian(p, 32)
print("initial mass", rho0.sum())

# %%
# The two collision angles: theta0 fixes the rest weight and theta1 carries u.
a = linear_angles(0.3)
print(f"theta0 = {a.theta0:.6f}, theta1 = {a.theta1:.6f}")

# %%
# The exact backend propagates the merged mixture that measure-and-reset leaves behind.
res = run_linear(LinearRunConfig(M=5, steps=20, u=0.3), rho0)
ref, _ = classical_run(rho0, 0.3, 20, "linear")
ana = analytic_gaussian(np.arange(32), 20, p, 0.3, 32)

print("max |quantum - classical| =", np.max(np.abs(res.final - ref)))
print("max |quantum - analytic|  =", np.max(np.abs(res.final - ana)))
print("peak cell", int(np.argmax(res.final)), "analytic peak", int(np.argmax(ana)))

# %%
for k in range(0, 32, 4):
    print(f"{k:3d}  {res.final[k]:.6f}  {ana[k]:.6f}")
