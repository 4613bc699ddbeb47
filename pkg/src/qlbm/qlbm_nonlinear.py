"""Hybrid single-step QLBM with the full second-order equilibrium.

The D1Q3 equilibrium is written as completed squares,

    f0 = w0 rho (1 - 3/2 u^2)
    f1 = 3 w1 rho (u + 1/2)^2 + w1 rho / 4
    f2 = 3 w2 rho (u - 1/2)^2 + w2 rho / 4

and every square-rooted term is placed in its own basis state of a 3-qubit
f-register.  The velocity parts of f1 and f2 are stored scaled by 1/sqrt(4)
(in |100> and |110>), so the readout multiplies their probabilities by 4.
Patterns |001>, |101>, |111> carry the remainder needed for unitarity and are
discarded.  After streaming and a full measurement the densities and
velocities are formed classically, the field is re-encoded, and the loop
repeats one step at a time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodedState, as_density_field, encode_sqrt_density
from .errors import AdmissibilityError, DegeneracyError, DomainError, StateError
from .lattice import D1Q3, VelocitySet
from .qcore import (
    GateSpec,
    QubitLayout,
    StateVector,
    apply_cyclic_shift,
    apply_gate,
    apply_multiplexed_ry,
    basis_probabilities,
    sample_basis,
    substream,
    swap_patterns,
)

F_QUBITS = 3
READOUTS = ("exact", "shots")


@dataclass
class NonlinearAngles:
    theta0: float
    theta1: float | np.ndarray
    theta2: float
    theta3: float | np.ndarray
    theta4: float | np.ndarray


def _as_angle(a):
    return float(a) if np.ndim(a) == 0 else a


def nonlinear_angles(u, vs: VelocitySet = D1Q3) -> NonlinearAngles:
    """The five RY arguments; ``u`` may be a scalar or a per-cell array.

    >>> a = nonlinear_angles(0.3)
    >>> round(a.theta3, 6), round(a.theta4, 6)
    (1.287002, 3.544308)
    """
    u = np.asarray(u, dtype=float)
    s1 = np.sqrt(1.5) * u
    if np.any(np.abs(s1) > 1 + 1e-12):
        raise AdmissibilityError(f"theta1 = 2 arcsin(sqrt(3/2) u) undefined: need |u| <= sqrt(2/3), got {u}")
    if np.any(np.abs(u + 0.5) > 1 + 1e-12):
        raise AdmissibilityError(f"theta3 = 2 arccos(u + 0.5) undefined: need |u + 0.5| <= 1, got {u}")
    if np.any(np.abs(u - 0.5) > 1 + 1e-12):
        raise AdmissibilityError(f"theta4 = 2 arccos(u - 0.5) undefined: need |u - 0.5| <= 1, got {u}")
    return NonlinearAngles(
        theta0=float(2 * np.arccos(np.sqrt(vs.weights[0]))),
        theta1=_as_angle(2 * np.arcsin(np.clip(s1, -1, 1))),
        theta2=float(2 * np.arccos(np.sqrt(0.25))),
        theta3=_as_angle(2 * np.arccos(np.clip(u + 0.5, -1, 1))),
        theta4=_as_angle(2 * np.arccos(np.clip(u - 0.5, -1, 1))),
    )


def nonlinear_layout(M: int) -> QubitLayout:
    return QubitLayout(F_QUBITS, M)


def collision_stages(state: StateVector, angles: NonlinearAngles) -> list[StateVector]:
    """States after each of the eight collision stages (the last is the output).

    Stage predicates, with q1 the first (rightmost) f-qubit:

    1. RY(theta0) on q1
    2. swap |001> <-> |010>
    3. RY(theta1) on q1 where q2 q3 = 0 0              (acts on |000>)
    4. RY(theta2) on q1 where q2 = 1, q3 = 0          (acts on |010>)
    5. swap |011> <-> |100>
    6. H on q1 where q2 = 1, q3 = 0 and where q2 = 0, q3 = 1
    7. swap |101> <-> |110>
    8. RY(theta3) on q1 where q2 = 0, q3 = 1; RY(theta4) on q1 where q2 = q3 = 1
    """
    if isinstance(state, EncodedState):
        state = state.state
    if np.any(np.abs(state.grid()[..., 1:, :]) > 1e-12):
        raise StateError("f-register must be |000> before the collision")
    lay = state.layout
    q1 = lay.f_qubit(1)
    ctl = lambda pat: lay.pattern_controls(pat, (2, 3))  # noqa: E731  pattern read as "q3 q2 q1"

    out = []
    state = apply_gate(state, GateSpec("RY", q1, theta=angles.theta0))
    out.append(state)
    state = swap_patterns(state, "001", "010")
    out.append(state)
    state = apply_multiplexed_ry(state, angles.theta1, q1, ctl("000"))
    out.append(state)
    state = apply_gate(state, GateSpec("RY", q1, ctl("010"), angles.theta2))
    out.append(state)
    state = swap_patterns(state, "011", "100")
    out.append(state)
    state = apply_gate(state, GateSpec("H", q1, ctl("010")))
    state = apply_gate(state, GateSpec("H", q1, ctl("100")))
    out.append(state)
    state = swap_patterns(state, "101", "110")
    out.append(state)
    state = apply_multiplexed_ry(state, angles.theta3, q1, ctl("100"))
    state = apply_multiplexed_ry(state, angles.theta4, q1, ctl("110"))
    out.append(state)
    return out


def apply_nonlinear_collision(state, angles: NonlinearAngles) -> StateVector:
    return collision_stages(state, angles)[-1]


def collision_amplitudes(u, w=D1Q3.weights):
    """Closed-form per-unit-density amplitudes of the collision output, by f-pattern."""
    u = np.asarray(u, dtype=float)
    w0, w1, w2 = w
    return {
        0b000: np.sqrt(w0 * (1 - 1.5 * u**2)),
        0b001: np.sqrt(1.5 * w0) * u,
        0b010: np.sqrt(0.25 * w1) * np.ones_like(u),
        0b011: np.sqrt(0.25 * w2) * np.ones_like(u),
        0b100: np.sqrt(0.75 * w1) * (u + 0.5),
        0b101: np.sqrt(0.75 * w1) * np.sqrt(1 - (u + 0.5) ** 2),
        0b110: np.sqrt(0.75 * w2) * (u - 0.5),
        0b111: np.sqrt(0.75 * w2) * np.sqrt(1 - (u - 0.5) ** 2),
    }


def apply_nonlinear_streaming(state: StateVector) -> StateVector:
    lay = state.layout
    for pat in ("010", "100"):
        state = apply_cyclic_shift(state, "positive", lay.pattern_controls(pat))
    for pat in ("011", "110"):
        state = apply_cyclic_shift(state, "negative", lay.pattern_controls(pat))
    return state


@dataclass(frozen=True)
class ReadoutLedger:
    """Classical map from measured pattern probabilities to distributions."""

    norm_sq: float
    f0: tuple = ((0b000, 1.0),)
    f1: tuple = ((0b100, 4.0), (0b010, 1.0))
    f2: tuple = ((0b110, 4.0), (0b011, 1.0))
    discarded: tuple = (0b001, 0b101, 0b111)


def readout_distributions(probabilities, ledger: ReadoutLedger):
    """Reconstruct ``(f0, f1, f2)`` fields from joint ``(pattern, cell)`` probabilities."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 2 or p.shape[0] != 1 << F_QUBITS:
        raise DomainError(f"expected probabilities of shape (8, n_cells), got {p.shape}")
    return tuple(
        ledger.norm_sq * sum(scale * p[pat] for pat, scale in terms)
        for terms in (ledger.f0, ledger.f1, ledger.f2)
    )


def nonlinear_step_probabilities(enc: EncodedState, u) -> np.ndarray:
    """Joint probabilities after one collision + streaming, shape ``(8, n_cells)``."""
    state = apply_nonlinear_streaming(apply_nonlinear_collision(enc.state, nonlinear_angles(u)))
    return basis_probabilities(state)


@dataclass
class NonlinearRunConfig:
    M: int = 5
    steps: int = 20
    readout: str = "exact"
    shots: int = 900_000
    seed: int = 0
    update_velocity: bool = False
    record: tuple | None = None

    def __post_init__(self):
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.steps < 0:
            raise DomainError("steps must be >= 0")
        if self.readout == "shots" and self.shots < 1:
            raise DomainError("shots must be >= 1 for shot readout")


@dataclass
class NonlinearResult:
    densities: dict
    velocities: dict
    distributions: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def final(self) -> np.ndarray:
        return self.densities[max(self.densities)]


def run_nonlinear(config: NonlinearRunConfig, initial_rho, initial_u, update_velocity=None) -> NonlinearResult:
    """Hybrid loop: encode, collide, stream, measure, take moments, repeat.

    With shot readout the measured frequencies replace the exact
    probabilities; sampling noise then feeds back into the next encoding and
    compounds over steps.
    """
    if update_velocity is None:
        update_velocity = config.update_velocity
    rho = as_density_field(initial_rho)
    u = np.broadcast_to(np.asarray(initial_u, dtype=float), rho.shape).copy()
    nonlinear_angles(u)
    lay = nonlinear_layout(config.M)
    record = [config.steps] if config.record is None else sorted(set(config.record))
    res = NonlinearResult({}, {})
    t0 = time.perf_counter()
    for t in range(config.steps + 1):
        if t in record:
            res.densities[t] = rho.copy()
            res.velocities[t] = u.copy()
        if t == config.steps:
            break
        enc = encode_sqrt_density(rho, lay)
        try:
            angles = nonlinear_angles(u)
        except AdmissibilityError as e:
            raise AdmissibilityError(f"step {t}: {e}") from None
        state = apply_nonlinear_streaming(apply_nonlinear_collision(enc.state, angles))
        if config.readout == "exact":
            probs = basis_probabilities(state)
        else:
            hist = sample_basis(state, config.shots, substream(config.seed, "nonlinear", f"step{t}"))
            probs = hist.frequencies.reshape(lay.n_patterns, lay.n_cells)
        f0, f1, f2 = readout_distributions(probs, ReadoutLedger(enc.norm_sq))
        rho = f0 + f1 + f2
        if t + 1 in record:
            res.distributions[t + 1] = (f0, f1, f2)
        if update_velocity:
            if np.any(rho <= 0):
                raise DegeneracyError(f"step {t + 1}: zero density cell, velocity undefined")
            u = (f1 - f2) / rho
    res.elapsed = time.perf_counter() - t0
    return res
