"""
The statevector engine
======================

A quick tour of the pieces the solvers are built from.
It covers layouts and controlled rotations, conditioned cyclic shifts,
and measurement with reset.
"""

# %%
import numpy as np

from qlbm.qcore import (
    GateSpec,
    QubitLayout,
    StateVector,
    apply_cyclic_shift,
    apply_gate,
    measure_register_and_reset,
    register_probabilities,
    substream,
)

# two f-qubits, three position qubits: index = pattern * 8 + cell
lay = QubitLayout(f_qubits=2, pos_qubits=3)
print(lay.n_qubits, "qubits,", lay.n_cells, "cells,", lay.dim, "amplitudes")

# %%
s = StateVector.basis(lay, "00", 2)
s = apply_gate(s, GateSpec("RY", lay.f_qubit(1), theta=2 * np.arccos(np.sqrt(2 / 3))))
s = apply_gate(s, GateSpec("H", lay.f_qubit(2), controls=[(lay.f_qubit(1), 1)]))
print("register probabilities", np.round(register_probabilities(s), 4))

# %%
# shift pattern 01 to the right and pattern 10 to the left
s = apply_cyclic_shift(s, "positive", lay.pattern_controls(0b01))
s = apply_cyclic_shift(s, "negative", lay.pattern_controls(0b10))
print(np.round(np.abs(s.grid()) ** 2, 4))

# %%
rng = substream(7, "demo")
outcome, post = measure_register_and_reset(s, rng)
print("measured pattern", outcome, "-> position amplitudes", np.round(post.grid()[0], 4))
