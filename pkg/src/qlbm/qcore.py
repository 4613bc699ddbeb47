"""Dense statevector engine for the QLBM circuits.

Basis ordering
--------------
A state over ``F`` f-register qubits and ``M`` position qubits is stored as a
flat real or complex array of length ``2**(F+M)``.  The basis index is::

    index = f_pattern * 2**M + k

so the f-register occupies the high bits and the lattice position ``k`` the
low bits.  Global qubit ``q`` is bit ``q`` of the index: qubits ``0..M-1``
are the position register, qubits ``M..M+F-1`` the f-register.

Ket labels are written ``|f>_f|k>`` with the usual most-significant-bit-left
convention, and the *first* f-qubit is the rightmost bit of the label (bit 0
of ``f_pattern``).  Flipping the first f-qubit therefore maps ``|00>_f`` to
``|01>_f``.  ``QubitLayout.f_qubit(1)`` returns its global index.

Batches
-------
Every operation also accepts amplitude arrays with one leading batch axis,
shape ``(B, 2**(F+M))``.  Each row is an independent pure state; this is how
shot trajectories with mid-circuit measurement are simulated in bulk.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DegeneracyError, DomainError, LayoutError

MAX_POSITION_QUBITS = 24
# branches with less probability than this cannot be renormalised
MIN_BRANCH_PROBABILITY = 1e-300

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_H = np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]])


def ry_matrix(theta: float) -> np.ndarray:
    """RY(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


# --------------------------------------------------------------------------
# layout and state
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitLayout:
    """Register sizes: ``f_qubits`` distribution qubits and ``pos_qubits`` position qubits."""

    f_qubits: int
    pos_qubits: int

    def __post_init__(self):
        if not 1 <= self.pos_qubits <= MAX_POSITION_QUBITS:
            raise LayoutError(
                f"pos_qubits must be in [1, {MAX_POSITION_QUBITS}], got {self.pos_qubits}"
            )
        if self.f_qubits < 0:
            raise LayoutError(f"f_qubits must be >= 0, got {self.f_qubits}")

    @property
    def n_qubits(self) -> int:
        return self.f_qubits + self.pos_qubits

    @property
    def n_cells(self) -> int:
        return 1 << self.pos_qubits

    @property
    def n_patterns(self) -> int:
        return 1 << self.f_qubits

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def f_qubit(self, j: int) -> int:
        """Global index of the ``j``-th f-qubit (1-based, first = rightmost label bit)."""
        if not 1 <= j <= self.f_qubits:
            raise LayoutError(f"f-qubit {j} out of range 1..{self.f_qubits}")
        return self.pos_qubits + j - 1

    def index(self, f_pattern: int, k: int) -> int:
        if not 0 <= f_pattern < self.n_patterns:
            raise LayoutError(f"f pattern {f_pattern} out of range")
        if not 0 <= k < self.n_cells:
            raise LayoutError(f"position {k} out of range")
        return (f_pattern << self.pos_qubits) | k

    def pattern_controls(self, pattern: int | str, qubits: Sequence[int] | None = None):
        """Control set that selects f-register bits equal to ``pattern``.

        ``pattern`` is an int or a ket label such as ``"010"``.  With ``qubits``
        (1-based f-qubit numbers) only those bits are constrained.
        """
        if isinstance(pattern, str):
            pattern = int(pattern, 2)
        js = range(1, self.f_qubits + 1) if qubits is None else qubits
        return tuple((self.f_qubit(j), (pattern >> (j - 1)) & 1) for j in js)


def format_pattern(pattern: int, width: int) -> str:
    """Ket label of an f-register pattern, e.g. ``format_pattern(1, 2) == '01'``."""
    return format(int(pattern), f"0{width}b")


@dataclass
class StateVector:
    """Amplitudes over ``(f-register) x (position register)``; optionally batched."""

    amplitudes: np.ndarray
    layout: QubitLayout

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        # real circuits (RY, X, H only) stay real: half the memory traffic
        self.amplitudes = amps.astype(complex if np.iscomplexobj(amps) else float, copy=False)
        if self.amplitudes.ndim not in (1, 2) or self.amplitudes.shape[-1] != self.layout.dim:
            raise LayoutError(
                f"amplitude array of shape {self.amplitudes.shape} does not match "
                f"{self.layout.n_qubits} qubits"
            )

    @classmethod
    def zero(cls, layout: QubitLayout) -> "StateVector":
        amps = np.zeros(layout.dim)
        amps[0] = 1.0
        return cls(amps, layout)

    @classmethod
    def basis(cls, layout: QubitLayout, f_pattern: int | str, k: int) -> "StateVector":
        if isinstance(f_pattern, str):
            f_pattern = int(f_pattern, 2)
        amps = np.zeros(layout.dim)
        amps[layout.index(f_pattern, k)] = 1.0
        return cls(amps, layout)

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    def grid(self) -> np.ndarray:
        """View of the amplitudes with shape ``(..., 2**F, 2**M)``."""
        lay = self.layout
        return self.amplitudes.reshape(self.amplitudes.shape[:-1] + (lay.n_patterns, lay.n_cells))

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def tile(self, n: int) -> "StateVector":
        """Batch of ``n`` copies of an unbatched state."""
        if self.batched:
            raise LayoutError("state is already batched")
        return StateVector(np.tile(self.amplitudes, (n, 1)), self.layout)


# --------------------------------------------------------------------------
# gates
# --------------------------------------------------------------------------

GATE_KINDS = ("RY", "X", "H")


@dataclass(frozen=True)
class GateSpec:
    """Single-target gate with an arbitrary set of ``(qubit, required_bit)`` controls."""

    kind: str
    target: int
    controls: tuple = ()
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "RY" and self.theta is None:
            raise ValueError("RY gate requires theta")
        controls = tuple(sorted((int(q), int(b)) for q, b in self.controls))
        object.__setattr__(self, "controls", controls)

    def matrix(self) -> np.ndarray:
        if self.kind == "RY":
            return ry_matrix(self.theta)
        return _X if self.kind == "X" else _H

    def inverse(self) -> "GateSpec":
        if self.kind == "RY":
            return GateSpec("RY", self.target, self.controls, -self.theta)
        return self


def _check_controls(layout: QubitLayout, target: int, controls: Iterable) -> tuple:
    n = layout.n_qubits
    if not 0 <= target < n:
        raise LayoutError(f"target qubit {target} out of range for {n} qubits")
    controls = tuple(sorted((int(q), int(b)) for q, b in controls))
    seen = set()
    for q, b in controls:
        if not 0 <= q < n:
            raise LayoutError(f"control qubit {q} out of range for {n} qubits")
        if q == target:
            raise LayoutError(f"qubit {q} is both target and control")
        if q in seen:
            raise LayoutError(f"qubit {q} listed twice as control")
        if b not in (0, 1):
            raise LayoutError(f"control value must be 0 or 1, got {b}")
        seen.add(q)
    return controls


@lru_cache(maxsize=256)
def _pattern_pairs(layout: QubitLayout, target: int, controls: tuple) -> tuple:
    """``(p0, p1)`` f-pattern pairs touched by a gate living on the f-register."""
    M = layout.pos_qubits
    tbit = target - M
    out = []
    for p in range(layout.n_patterns):
        if (p >> tbit) & 1:
            continue
        if all(((p >> (q - M)) & 1) == b for q, b in controls):
            out.append((p, p | (1 << tbit)))
    return tuple(out)


def _update_slices(grid: np.ndarray, pairs, m00, m01, m10, m11):
    """In-place 2x2 update of ``grid[..., p0, :]`` / ``grid[..., p1, :]`` pairs."""
    for p0, p1 in pairs:
        a0 = grid[..., p0, :].copy()
        a1 = grid[..., p1, :]
        grid[..., p0, :] = m00 * a0 + m01 * a1
        grid[..., p1, :] = m10 * a0 + m11 * a1


@lru_cache(maxsize=256)
def _pair_indices(n: int, target: int, controls: tuple) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n)
    mask = ((idx >> target) & 1) == 0
    for q, b in controls:
        mask &= ((idx >> q) & 1) == b
    i0 = idx[mask]
    return i0, i0 | (1 << target)


def _apply_pairs(amps: np.ndarray, i0, i1, m00, m01, m10, m11) -> np.ndarray:
    a0 = amps[..., i0]
    a1 = amps[..., i1]
    out = amps.copy()
    out[..., i0] = m00 * a0 + m01 * a1
    out[..., i1] = m10 * a0 + m11 * a1
    return out


def apply_gate(state: StateVector, gate: GateSpec) -> StateVector:
    """Apply ``gate`` to the subspace where all of its controls hold.

    >>> lay = QubitLayout(0, 1)
    >>> apply_gate(StateVector.zero(lay), GateSpec("X", 0)).amplitudes.real
    array([0., 1.])
    """
    lay = state.layout
    controls = _check_controls(lay, gate.target, gate.controls)
    m = gate.matrix()
    if _on_f_register(lay, gate.target, controls):
        out = state.copy()
        pairs = _pattern_pairs(lay, gate.target, controls)
        _update_slices(out.grid(), pairs, m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        return out
    i0, i1 = _pair_indices(lay.n_qubits, gate.target, controls)
    amps = _apply_pairs(state.amplitudes, i0, i1, m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    return StateVector(amps, lay)


def _on_f_register(layout: QubitLayout, target: int, controls: tuple) -> bool:
    return target >= layout.pos_qubits and all(q >= layout.pos_qubits for q, _ in controls)


def apply_circuit(state: StateVector, gates: Iterable[GateSpec]) -> StateVector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def apply_multiplexed_ry(state: StateVector, thetas, target: int, controls=()) -> StateVector:
    """RY on an f-qubit whose angle depends on the lattice position.

    ``thetas[k]`` is used in the slice ``|.>_f|k>``.  This is the per-cell 2x2
    update that a uniformly controlled rotation on the position register
    implements; no decomposition into elementary gates is attempted.
    """
    lay = state.layout
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim == 0:
        return apply_gate(state, GateSpec("RY", target, controls, float(thetas)))
    if thetas.shape != (lay.n_cells,):
        raise LayoutError(f"need {lay.n_cells} angles, got shape {thetas.shape}")
    if target < lay.pos_qubits:
        raise LayoutError("multiplexed rotation target must be an f-register qubit")
    controls = _check_controls(lay, target, controls)
    c = np.cos(thetas / 2)
    s = np.sin(thetas / 2)
    if _on_f_register(lay, target, controls):
        out = state.copy()
        _update_slices(out.grid(), _pattern_pairs(lay, target, controls), c, -s, s, c)
        return out
    i0, i1 = _pair_indices(lay.n_qubits, target, controls)
    pos = i0 & (lay.n_cells - 1)
    amps = _apply_pairs(state.amplitudes, i0, i1, c[pos], -s[pos], s[pos], c[pos])
    return StateVector(amps, lay)


def transposition_gates(layout: QubitLayout, a: int | str, b: int | str) -> list[GateSpec]:
    """Multi-controlled X sequence exchanging f-patterns ``a`` and ``b``.

    Walks a Gray-code path from ``a`` to ``b`` and back; every gate is an X on
    one f-qubit controlled on all other f-qubits, i.e. a transposition of two
    neighbouring patterns.  Patterns other than ``a`` and ``b`` end up fixed.
    """
    if isinstance(a, str):
        a = int(a, 2)
    if isinstance(b, str):
        b = int(b, 2)
    F = layout.f_qubits
    for p in (a, b):
        if not 0 <= p < layout.n_patterns:
            raise LayoutError(f"pattern {p} out of range for {F} f-qubits")
    diff = [j for j in range(1, F + 1) if ((a ^ b) >> (j - 1)) & 1]
    path_bits = []
    cur = a
    for j in diff:
        path_bits.append((j, cur))
        cur ^= 1 << (j - 1)
    # forward over all flips, then undo all but the last in reverse
    moves = path_bits + path_bits[-2::-1]
    gates = []
    for j, pattern in moves:
        others = [i for i in range(1, F + 1) if i != j]
        gates.append(GateSpec("X", layout.f_qubit(j), layout.pattern_controls(pattern, others)))
    return gates


def swap_patterns(state: StateVector, a: int | str, b: int | str) -> StateVector:
    """Exchange the amplitudes of f-patterns ``a`` and ``b`` at every position."""
    return apply_circuit(state, transposition_gates(state.layout, a, b))


# --------------------------------------------------------------------------
# streaming
# --------------------------------------------------------------------------


def apply_cyclic_shift(state: StateVector, direction: str, controls=()) -> StateVector:
    """Conditioned periodic shift of the position register.

    ``positive`` sends ``|k>`` to ``|k+1 mod 2**M>``; ``negative`` sends
    ``|k+1 mod 2**M>`` to ``|k>``.  Only f-patterns that satisfy every
    ``(qubit, bit)`` control are moved; controls must be f-register qubits.
    """
    if direction not in ("positive", "negative"):
        raise ValueError(f"direction must be 'positive' or 'negative', got {direction!r}")
    lay = state.layout
    sel = np.ones(lay.n_patterns, dtype=bool)
    patterns = np.arange(lay.n_patterns)
    for q, b in controls:
        if not lay.pos_qubits <= q < lay.n_qubits:
            raise LayoutError(f"shift control {q} is not an f-register qubit")
        sel &= ((patterns >> (q - lay.pos_qubits)) & 1) == b
    shift = 1 if direction == "positive" else -1
    out = state.copy()
    grid = out.grid()
    for p in np.flatnonzero(sel):
        grid[..., p, :] = np.roll(grid[..., p, :], shift, axis=-1)
    return out


# --------------------------------------------------------------------------
# measurement and sampling
# --------------------------------------------------------------------------


def substream(seed: int, *names: str) -> np.random.Generator:
    """Independent generator derived from ``seed`` and a path of names.

    ``substream(7, "shots", "chunk3")`` always yields the same stream, and
    distinct name paths give statistically independent streams.
    """
    key = tuple(zlib.crc32(n.encode()) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def register_probabilities(state: StateVector) -> np.ndarray:
    """Probability of each f-pattern, shape ``(..., 2**F)``."""
    return np.sum(np.abs(state.grid()) ** 2, axis=-1)


def position_probabilities(state: StateVector) -> np.ndarray:
    """Marginal probability of each lattice position, shape ``(..., 2**M)``."""
    return np.sum(np.abs(state.grid()) ** 2, axis=-2)


def basis_probabilities(state: StateVector) -> np.ndarray:
    """Joint probabilities with shape ``(..., 2**F, 2**M)``."""
    return np.abs(state.grid()) ** 2


def _draw_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (rows need not be normalised)."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=-1)
    total = cdf[:, -1:]
    r = rng.random((probs.shape[0], 1)) * total
    out = np.sum(cdf <= r, axis=-1)
    # guard against r landing exactly on the total through rounding
    return np.minimum(out, probs.shape[-1] - 1)


def measure_register_and_reset(state: StateVector, rng: np.random.Generator):
    """Measure the whole f-register, collapse, renormalise and reset it to all-zero.

    Returns ``(outcome, new_state)``.  For a batched state ``outcome`` is an
    integer array with one pattern per row.
    """
    probs = register_probabilities(state)
    outcome = _draw_rows(probs, rng)
    rows = np.arange(outcome.shape[0])
    p = np.atleast_2d(probs)[rows, outcome]
    if np.any(p < MIN_BRANCH_PROBABILITY):
        raise DegeneracyError("measured branch has vanishing probability")
    grid = state.grid()
    if not state.batched:
        grid = grid[None]
    branch = grid[rows, outcome, :] / np.sqrt(p)[:, None]
    new = np.zeros_like(grid)
    new[:, 0, :] = branch
    if state.batched:
        return outcome, StateVector(new.reshape(state.amplitudes.shape), state.layout)
    return int(outcome[0]), StateVector(new.reshape(-1), state.layout)


@dataclass
class ShotHistogram:
    """Counts per measured basis state (positions, or flattened ``(f, k)`` pairs)."""

    counts: np.ndarray
    shots: int
    norm_sq: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.shots < 1:
            raise DomainError("histogram needs at least one shot")

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots

    def __add__(self, other: "ShotHistogram") -> "ShotHistogram":
        if self.counts.shape != other.counts.shape:
            raise LayoutError("cannot merge histograms over different registers")
        return ShotHistogram(
            self.counts + other.counts, self.shots + other.shots, self.norm_sq, dict(self.meta)
        )


def _check_shots(shots) -> int:
    if int(shots) != shots or shots < 1:
        raise DomainError(f"shots must be a positive integer, got {shots}")
    return int(shots)


def sample_positions(state: StateVector, shots: int, rng: np.random.Generator) -> ShotHistogram:
    """Histogram of ``shots`` independent position measurements of one state."""
    shots = _check_shots(shots)
    if state.batched:
        raise LayoutError("use sample_trajectories for batched states")
    p = position_probabilities(state)
    counts = rng.multinomial(shots, p / p.sum())
    return ShotHistogram(counts, shots)


def sample_basis(state: StateVector, shots: int, rng: np.random.Generator) -> ShotHistogram:
    """Histogram over all ``2**(F+M)`` basis states (full-register measurement)."""
    shots = _check_shots(shots)
    if state.batched:
        raise LayoutError("use sample_trajectories for batched states")
    p = np.abs(state.amplitudes) ** 2
    counts = rng.multinomial(shots, p / p.sum())
    return ShotHistogram(counts, shots)


def sample_trajectories(state: StateVector, rng: np.random.Generator) -> ShotHistogram:
    """Measure the position register once in each row of a batched state."""
    if not state.batched:
        raise LayoutError("sample_trajectories expects a batched state")
    draws = _draw_rows(position_probabilities(state), rng)
    counts = np.bincount(draws, minlength=state.layout.n_cells)
    return ShotHistogram(counts, len(draws))


# --------------------------------------------------------------------------
# weighted trajectory ensembles
# --------------------------------------------------------------------------
#
# A batch of distinct pure states with integer multiplicities stands for
# ``sum(multiplicity)`` shots.  Shots that share a state are exchangeable, so
# splitting a row of ``n`` shots with one multinomial draw over the measurement
# outcomes has exactly the law of ``n`` independent per-shot measurements.

# amplitudes are compared after rounding to this many decimals when merging
MERGE_DECIMALS = 13


def measure_and_reset_ensemble(state: StateVector, multiplicity, rng: np.random.Generator):
    """Measure and reset the f-register in every shot of a weighted ensemble.

    Returns ``(new_state, new_multiplicity)``; every (row, outcome) pair that
    received at least one shot becomes a row of the new batch.
    """
    if not state.batched:
        raise LayoutError("ensemble states must be batched")
    mult = np.asarray(multiplicity, dtype=np.int64)
    probs = register_probabilities(state)
    probs = probs / probs.sum(axis=-1, keepdims=True)
    split = rng.multinomial(mult, probs)
    rows, outcomes = np.nonzero(split)
    p = probs[rows, outcomes]
    if np.any(p < MIN_BRANCH_PROBABILITY):
        raise DegeneracyError("measured branch has vanishing probability")
    grid = state.grid()
    new = np.zeros((len(rows),) + grid.shape[1:], dtype=grid.dtype)
    new[:, 0, :] = grid[rows, outcomes, :] / np.sqrt(p)[:, None]
    return StateVector(new.reshape(len(rows), -1), state.layout), split[rows, outcomes]


def merge_duplicates(state: StateVector, multiplicity):
    """Collapse rows holding the same state (to ``MERGE_DECIMALS``), adding multiplicities."""
    mult = np.asarray(multiplicity, dtype=np.int64)
    key = np.round(state.amplitudes, MERGE_DECIMALS) + 0.0  # folds -0.0 into 0.0
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    merged = np.zeros(len(first), dtype=np.int64)
    np.add.at(merged, inverse.reshape(-1), mult)
    return StateVector(state.amplitudes[first], state.layout), merged


def sample_positions_ensemble(state: StateVector, multiplicity, rng: np.random.Generator) -> ShotHistogram:
    """Final position measurement of every shot in a weighted ensemble."""
    mult = np.asarray(multiplicity, dtype=np.int64)
    p = position_probabilities(state)
    p = p / p.sum(axis=-1, keepdims=True)
    counts = rng.multinomial(mult, p).sum(axis=0)
    return ShotHistogram(counts, int(mult.sum()))
