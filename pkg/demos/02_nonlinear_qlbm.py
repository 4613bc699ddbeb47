"""
Nonlinear equilibrium with three f-qubits
=========================================

The quadratic equilibrium is built by an eight-stage collision block.
Its output is read back through the factor-4 readout ledger.
We print the per-pattern squared amplitudes for a single cell.
We then run the same Gaussian hill as the linear demo.
"""

# %%
import numpy as np

from qlbm.encoding import encode_sqrt_density
from qlbm.lattice import GaussianParams, analytic_gaussian, classical_run, equilibrium, initial_gaussian
from qlbm.qcore import format_pattern
from qlbm.qlbm_nonlinear import (
    NonlinearRunConfig,
    collision_stages,
    nonlinear_angles,
    nonlinear_layout,
    run_nonlinear,
)

u = 0.3
a = nonlinear_angles(u)
print("angles:", ", ".join(f"{v:.6f}" for v in (a.theta0, a.theta1, a.theta2, a.theta3, a.theta4)))

# %%
# One cell holding all the mass: watch the register fill up stage by stage.
enc = encode_sqrt_density([1.0, 0.0], nonlinear_layout(1))
stages = collision_stages(enc, a)
for i, s in enumerate(stages, 1):
    amps = s.grid()[:, 0]
    terms = [f"{format_pattern(j, 3)}:{amps[j]:+.4f}" for j in range(8) if abs(amps[j]) > 1e-14]
    print(f"stage {i}: " + "  ".join(terms))

# %%
p2 = np.abs(stages[-1].grid()[:, 0]) ** 2
f0 = p2[0b000]
f1 = 4 * p2[0b100] + p2[0b010]
f2 = 4 * p2[0b110] + p2[0b011]
print("readout     ", np.round([f0, f1, f2], 6))
print("equilibrium ", np.round(equilibrium(1.0, u, "nonlinear"), 6))

# %%
p = GaussianParams()
rho0 = initial_gaussian(p, 32)
res = run_nonlinear(NonlinearRunConfig(M=5, steps=20), rho0, u)
ref, _ = classical_run(rho0, u, 20, "nonlinear")
lin, _ = classical_run(rho0, u, 20, "linear")
ana = analytic_gaussian(np.arange(32), 20, p, u, 32)
print("max |quantum - classical| =", np.max(np.abs(res.final - ref)))
print("Linf vs analytic: nonlinear %.4f, linear %.4f"
      % (np.max(np.abs(res.final - ana)), np.max(np.abs(lin - ana))))
