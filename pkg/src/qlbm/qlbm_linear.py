"""Linear multi-timestep QLBM with mid-circuit measurement and reset.

Register layout: two f-qubits and ``M`` position qubits.  One time step is

1. RY(theta0) on f-qubit 1                    -> sqrt(w0)|00> + sqrt(w1+w2)|01>
2. RY(theta1) on f-qubit 2, control f-qubit 1  -> splits |01> into |01>, |11>
3. CNOT (target f-qubit 1, control f-qubit 2)  -> relabels |11> as |10>
4. shift +1 on |01>_f, shift -1 on |10>_f
5. measure the f-register, reset it to |00>_f

after which the position marginal equals rho(t+1)/C2 of the classical
linear LBM.  Only the final position register is sampled.

Exact backend
-------------
Every gate above is either block-diagonal in the position index (the
rotations) or a permutation that maps distinct ``(f, k)`` to distinct
``(f, k')`` (the shifts).  Each output amplitude therefore depends on exactly
one input position amplitude and no two positions ever interfere, so output
position probabilities are a linear function of input position
probabilities.  The mixture produced by measure-and-reset is then
observationally equivalent to the pure state ``sum_k sqrt(p_k)|00>|k>`` built
from its position marginal, which is what ``merge_register`` returns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodedState, as_density_field, decode_density, decode_histogram, encode_sqrt_density
from .errors import AdmissibilityError, DomainError, StateError
from .lattice import D1Q3, VelocitySet, check_velocity
from .qcore import (
    GateSpec,
    QubitLayout,
    ShotHistogram,
    StateVector,
    apply_cyclic_shift,
    apply_gate,
    apply_multiplexed_ry,
    measure_and_reset_ensemble,
    measure_register_and_reset,
    merge_duplicates,
    position_probabilities,
    sample_positions_ensemble,
    sample_trajectories,
    substream,
    swap_patterns,
)

F_QUBITS = 2
BACKENDS = ("exact", "shots")
# rows per batched trajectory chunk; also fixes how RNG substreams are split
DEFAULT_CHUNK = 1 << 12


@dataclass
class LinearCollisionAngles:
    theta0: float
    theta1: float | np.ndarray


def linear_angles(u, vs: VelocitySet = D1Q3) -> LinearCollisionAngles:
    """RY arguments of the linear collision; ``u`` may be a scalar or per-cell array."""
    u = np.asarray(u, dtype=float)
    arg = 0.5 * (1 + u / vs.cs_sq)
    if np.any(arg < -1e-12) or np.any(arg > 1 + 1e-12):
        raise AdmissibilityError(
            f"theta1 = 2 arccos(sqrt(0.5 (1 + u/cs^2))) undefined for u = {u}: need |u| <= cs^2"
        )
    theta0 = 2 * np.arccos(np.sqrt(vs.weights[0]))
    theta1 = 2 * np.arccos(np.sqrt(np.clip(arg, 0.0, 1.0)))
    return LinearCollisionAngles(float(theta0), float(theta1) if theta1.ndim == 0 else theta1)


def linear_layout(M: int) -> QubitLayout:
    return QubitLayout(F_QUBITS, M)


def _require_reset(state: StateVector):
    rest = state.grid()[..., 1:, :]
    if np.any(np.abs(rest) > 1e-12):
        raise StateError("f-register must be |00> before the collision")


def apply_linear_collision(state, angles: LinearCollisionAngles) -> StateVector:
    if isinstance(state, EncodedState):
        state = state.state
    _require_reset(state)
    lay = state.layout
    q1, q2 = lay.f_qubit(1), lay.f_qubit(2)
    state = apply_gate(state, GateSpec("RY", q1, theta=angles.theta0))
    state = apply_multiplexed_ry(state, angles.theta1, q2, controls=[(q1, 1)])
    return swap_patterns(state, "11", "10")


def apply_linear_streaming(state: StateVector) -> StateVector:
    lay = state.layout
    state = apply_cyclic_shift(state, "positive", lay.pattern_controls("01"))
    return apply_cyclic_shift(state, "negative", lay.pattern_controls("10"))


def merge_register(state: StateVector) -> StateVector:
    """Replace the post-measurement mixture by the equivalent pure state.

    Valid only for circuits without inter-position interference (see module
    docstring); the result has the f-register in ``|0...0>``.
    """
    p = position_probabilities(state)
    amps = np.zeros_like(state.amplitudes)
    amps[..., : state.layout.n_cells] = np.sqrt(p)
    return StateVector(amps, state.layout)


@dataclass
class LinearRunConfig:
    M: int = 5
    steps: int = 20
    u: float | np.ndarray = 0.3
    shots: int = 900_000
    seed: int = 0
    backend: str = "exact"
    record: tuple | None = None
    sampler: str = "ensemble"
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.steps < 0:
            raise DomainError("steps must be >= 0")
        if self.backend == "shots" and self.shots < 1:
            raise DomainError("shots must be >= 1 for the shot backend")
        check_velocity(self.u, "linear")

    def recorded_steps(self) -> list[int]:
        steps = [self.steps] if self.record is None else sorted(set(self.record))
        if any(not 0 <= s <= self.steps for s in steps):
            raise DomainError(f"recorded steps must lie in [0, {self.steps}]")
        return steps


@dataclass
class LinearResult:
    densities: dict
    norm_sq: float
    stderr: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def final(self) -> np.ndarray:
        return self.densities[max(self.densities)]


def _one_step(state: StateVector, angles) -> StateVector:
    return apply_linear_streaming(apply_linear_collision(state, angles))


def _run_exact(enc: EncodedState, angles, cfg: LinearRunConfig) -> LinearResult:
    record = cfg.recorded_steps()
    state = enc.state
    out = {}
    for t in range(cfg.steps + 1):
        if t in record:
            out[t] = decode_density(position_probabilities(state), enc.norm_sq)
        if t < cfg.steps:
            state = merge_register(_one_step(state, angles))
    return LinearResult(out, enc.norm_sq)


def shot_histogram(enc: EncodedState, angles, steps: int, shots: int, seed: int,
                   method: str = "ensemble", chunk: int = DEFAULT_CHUNK,
                   label: str = "linear") -> ShotHistogram:
    """Simulate ``shots`` independent trajectories of ``steps`` time steps.

    Every shot is measured and reset after each step and finally measured in
    the position register.  ``method="ensemble"`` keeps one row per distinct
    pure state with a shot multiplicity (fast when velocities are uniform);
    ``method="rows"`` carries one row per shot, in batches of ``chunk``.
    Both are exact samplers of the same process.
    """
    if shots < 1:
        raise DomainError("shots must be >= 1")
    if method == "ensemble":
        rng = substream(seed, label, f"steps{steps}", "ensemble")
        state = enc.state.tile(1)
        mult = np.array([shots])
        for _ in range(steps):
            state, mult = measure_and_reset_ensemble(_one_step(state, angles), mult, rng)
            state, mult = merge_duplicates(state, mult)
        hist = sample_positions_ensemble(state, mult, rng)
        hist.norm_sq = enc.norm_sq
        hist.meta["max_rows"] = len(mult)
        return hist
    if method != "rows":
        raise ValueError(f"unknown sampling method {method!r}")
    counts = np.zeros(enc.state.layout.n_cells, dtype=np.int64)
    done = 0
    i = 0
    while done < shots:
        n = min(chunk, shots - done)
        rng = substream(seed, label, f"steps{steps}", f"chunk{i}")
        state = enc.state.tile(n)
        for _ in range(steps):
            _, state = measure_register_and_reset(_one_step(state, angles), rng)
        counts += sample_trajectories(state, rng).counts
        done += n
        i += 1
    return ShotHistogram(counts, shots, enc.norm_sq)


def _run_shots(enc: EncodedState, angles, cfg: LinearRunConfig) -> LinearResult:
    res = LinearResult({}, enc.norm_sq)
    # each recorded step needs its own batch: sampling ends the trajectory
    for t in cfg.recorded_steps():
        hist = shot_histogram(enc, angles, t, cfg.shots, cfg.seed, cfg.sampler, cfg.chunk)
        rho, err = decode_histogram(hist)
        res.densities[t] = rho
        res.stderr[t] = err
        res.histograms[t] = hist
    return res


def run_linear(config: LinearRunConfig, initial) -> LinearResult:
    """Run the linear QLBM from ``initial`` density.

    The returned densities are keyed by time step (default: only the last).
    """
    rho0 = as_density_field(initial)
    lay = linear_layout(config.M)
    u = np.asarray(config.u, dtype=float)
    if u.ndim and u.shape != rho0.shape:
        raise DomainError("per-cell velocity must match the field length")
    angles = linear_angles(u)
    enc = encode_sqrt_density(rho0, lay)
    t0 = time.perf_counter()
    if config.backend == "exact":
        res = _run_exact(enc, angles, config)
    else:
        res = _run_shots(enc, angles, config)
    res.elapsed = time.perf_counter() - t0
    return res
