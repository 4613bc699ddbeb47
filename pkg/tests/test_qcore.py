import numpy as np
import pytest

from conftest import dense_controlled, random_state
from qlbm.errors import DegeneracyError, DomainError, LayoutError
from qlbm.qcore import (
    GateSpec,
    QubitLayout,
    StateVector,
    apply_cyclic_shift,
    apply_gate,
    apply_multiplexed_ry,
    format_pattern,
    measure_and_reset_ensemble,
    measure_register_and_reset,
    merge_duplicates,
    position_probabilities,
    register_probabilities,
    ry_matrix,
    sample_positions,
    sample_positions_ensemble,
    sample_trajectories,
    substream,
    swap_patterns,
    transposition_gates,
)


def test_ry_on_zero_gives_linear_rest_split():
    lay = QubitLayout(0, 1)
    theta0 = 2 * np.arccos(np.sqrt(2 / 3))
    assert theta0 == pytest.approx(1.2309594173407747, abs=1e-12)
    s = apply_gate(StateVector.zero(lay), GateSpec("RY", 0, theta=theta0))
    np.testing.assert_allclose(s.amplitudes, [np.sqrt(2 / 3), np.sqrt(1 / 3)], atol=1e-12)


def test_x_and_h_on_zero():
    lay = QubitLayout(0, 1)
    np.testing.assert_allclose(apply_gate(StateVector.zero(lay), GateSpec("X", 0)).amplitudes, [0, 1])
    np.testing.assert_allclose(
        apply_gate(StateVector.zero(lay), GateSpec("H", 0)).amplitudes, [2**-0.5, 2**-0.5]
    )


def test_unsatisfied_control_leaves_state():
    lay = QubitLayout(0, 2)
    s = StateVector.zero(lay)
    out = apply_gate(s, GateSpec("RY", 0, controls=[(1, 1)], theta=0.7))
    np.testing.assert_array_equal(out.amplitudes, s.amplitudes)


def test_ry_matrix_convention():
    np.testing.assert_allclose(ry_matrix(np.pi), [[0, -1], [1, 0]], atol=1e-15)


def test_first_f_qubit_is_rightmost_label_bit():
    lay = QubitLayout(2, 1)
    s = apply_gate(StateVector.basis(lay, "00", 0), GateSpec("X", lay.f_qubit(1)))
    assert s.amplitudes[lay.index(0b01, 0)] == 1
    assert format_pattern(1, 2) == "01"


@pytest.mark.parametrize("kind", ["RY", "X", "H"])
def test_apply_gate_matches_dense_matrix(rng, kind):
    lay = QubitLayout(2, 2)
    n = lay.n_qubits
    for _ in range(30):
        target = int(rng.integers(n))
        others = [q for q in range(n) if q != target]
        k = int(rng.integers(0, len(others) + 1))
        qs = rng.choice(others, size=k, replace=False)
        controls = [(int(q), int(rng.integers(2))) for q in qs]
        gate = GateSpec(kind, target, controls, float(rng.uniform(-4, 4)) if kind == "RY" else None)
        psi = random_state(rng, lay.dim)
        expected = dense_controlled(n, target, controls, gate.matrix()) @ psi
        got = apply_gate(StateVector(psi, lay), gate).amplitudes
        np.testing.assert_allclose(got, expected, atol=1e-12)


def test_multiplexed_ry_matches_per_cell_gates(rng):
    lay = QubitLayout(2, 3)
    thetas = rng.uniform(-3, 3, lay.n_cells)
    psi = StateVector(random_state(rng, lay.dim), lay)
    got = apply_multiplexed_ry(psi, thetas, lay.f_qubit(2), [(lay.f_qubit(1), 1)])
    # oracle: one fully position-controlled RY per cell
    ref = psi
    for k, th in enumerate(thetas):
        ctl = [(lay.f_qubit(1), 1)] + [(b, (k >> b) & 1) for b in range(lay.pos_qubits)]
        ref = apply_gate(ref, GateSpec("RY", lay.f_qubit(2), ctl, th))
    np.testing.assert_allclose(got.amplitudes, ref.amplitudes, atol=1e-12)


def test_gate_layout_errors():
    lay = QubitLayout(2, 2)
    s = StateVector.zero(lay)
    with pytest.raises(LayoutError):
        apply_gate(s, GateSpec("X", 4))
    with pytest.raises(LayoutError):
        apply_gate(s, GateSpec("X", 1, [(1, 1)]))
    with pytest.raises(LayoutError):
        apply_gate(s, GateSpec("X", 1, [(7, 1)]))
    with pytest.raises(LayoutError):
        QubitLayout(2, 0)
    with pytest.raises(LayoutError):
        QubitLayout(2, 25)


@pytest.mark.parametrize("a,b", [("001", "010"), ("011", "100"), ("101", "110"), ("000", "111")])
def test_transposition_swaps_exactly_two_patterns(rng, a, b):
    lay = QubitLayout(3, 2)
    psi = StateVector(random_state(rng, lay.dim), lay)
    out = swap_patterns(psi, a, b).grid()
    g = psi.grid()
    ia, ib = int(a, 2), int(b, 2)
    for p in range(8):
        src = ib if p == ia else ia if p == ib else p
        np.testing.assert_allclose(out[p], g[src], atol=1e-15)
    assert all(gt.kind == "X" and len(gt.controls) == 2 for gt in transposition_gates(lay, a, b))


def test_cyclic_shift_wraps():
    lay = QubitLayout(0, 2)
    s = apply_cyclic_shift(StateVector.basis(lay, 0, 3), "positive")
    assert s.amplitudes[0] == 1
    s = apply_cyclic_shift(StateVector.basis(lay, 0, 0), "negative")
    assert s.amplitudes[3] == 1


def test_conditioned_shift_moves_only_selected_pattern():
    lay = QubitLayout(2, 1)
    amps = np.zeros(lay.dim)
    amps[lay.index(0b01, 0)] = np.sqrt(0.5)
    amps[lay.index(0b00, 0)] = np.sqrt(0.5)
    out = apply_cyclic_shift(StateVector(amps, lay), "positive", lay.pattern_controls("01"))
    assert out.amplitudes[lay.index(0b01, 1)] == pytest.approx(np.sqrt(0.5))
    assert out.amplitudes[lay.index(0b00, 0)] == pytest.approx(np.sqrt(0.5))
    assert out.amplitudes[lay.index(0b01, 0)] == 0


def test_negative_inverts_positive(rng):
    lay = QubitLayout(2, 4)
    psi = StateVector(random_state(rng, lay.dim), lay)
    ctl = lay.pattern_controls("10")
    back = apply_cyclic_shift(apply_cyclic_shift(psi, "positive", ctl), "negative", ctl)
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)


def test_shift_controls_must_be_f_register():
    lay = QubitLayout(2, 2)
    with pytest.raises(LayoutError):
        apply_cyclic_shift(StateVector.zero(lay), "positive", [(0, 1)])


def test_measure_deterministic_branch(rng):
    lay = QubitLayout(2, 3)
    outcome, s = measure_register_and_reset(StateVector.basis(lay, "01", 5), rng)
    assert format_pattern(outcome, 2) == "01"
    assert s.amplitudes[lay.index(0, 5)] == pytest.approx(1.0)


def test_measure_distribution_at_rest():
    lay = QubitLayout(2, 1)
    amps = np.zeros(lay.dim)
    for f, w in ((0b00, 2 / 3), (0b01, 1 / 6), (0b10, 1 / 6)):
        amps[lay.index(f, 0)] = np.sqrt(w / 2)
        amps[lay.index(f, 1)] = np.sqrt(w / 2)
    s = StateVector(amps, lay)
    np.testing.assert_allclose(register_probabilities(s), [2 / 3, 1 / 6, 1 / 6, 0], atol=1e-15)
    outs = [measure_register_and_reset(s, substream(3, "m", str(i)))[0] for i in range(3000)]
    freq = np.bincount(outs, minlength=4) / 3000
    np.testing.assert_allclose(freq, [2 / 3, 1 / 6, 1 / 6, 0], atol=5 * np.sqrt(0.25 / 3000))


def test_measure_seeded_reproducible():
    lay = QubitLayout(2, 2)
    s = StateVector(np.full(lay.dim, 0.25), lay)

    def seq(seed):
        r = substream(seed, "run")
        return [measure_register_and_reset(s, r)[0] for _ in range(50)]

    assert seq(9) == seq(9)
    assert seq(9) != seq(10)


def test_measure_degenerate_state_raises(rng):
    lay = QubitLayout(2, 1)
    with pytest.raises(DegeneracyError):
        measure_register_and_reset(StateVector(np.zeros(lay.dim), lay), rng)


def test_position_probabilities():
    lay = QubitLayout(2, 3)
    amps = np.zeros(lay.dim)
    amps[[0, 1]] = 2**-0.5
    np.testing.assert_allclose(position_probabilities(StateVector(amps, lay)), [0.5, 0.5] + [0] * 6)
    amps = np.zeros(QubitLayout(2, 2).dim)
    amps[:4] = 0.5
    np.testing.assert_allclose(position_probabilities(StateVector(amps, QubitLayout(2, 2))), [0.25] * 4)


def test_sample_positions_deterministic(rng):
    lay = QubitLayout(2, 3)
    h = sample_positions(StateVector.basis(lay, 0, 5), 100, rng)
    assert h.counts[5] == 100 and h.counts.sum() == 100


def test_sample_positions_binomial_spread():
    lay = QubitLayout(0, 1)
    s = StateVector(np.array([2**-0.5, 2**-0.5]), lay)
    h = sample_positions(s, 900_000, substream(1, "bin"))
    # 3 sigma of Binomial(900000, 1/2)
    assert np.all(np.abs(h.counts - 450_000) <= 3 * np.sqrt(0.25 * 900_000))
    h2 = sample_positions(s, 900_000, substream(1, "bin"))
    np.testing.assert_array_equal(h.counts, h2.counts)


def test_sample_positions_rejects_zero_shots(rng):
    with pytest.raises(DomainError):
        sample_positions(StateVector.zero(QubitLayout(0, 1)), 0, rng)


def test_batched_rows_are_independent_states(rng):
    lay = QubitLayout(2, 2)
    psi = random_state(rng, lay.dim, batch=5)
    gate = GateSpec("H", lay.f_qubit(2), [(lay.f_qubit(1), 0)])
    batched = apply_gate(StateVector(psi, lay), gate)
    for i in range(5):
        single = apply_gate(StateVector(psi[i], lay), gate)
        np.testing.assert_allclose(batched.amplitudes[i], single.amplitudes, atol=1e-15)


def test_ensemble_split_matches_per_row_sampling():
    """Two samplers of the same measure-reset-measure process agree in law."""
    lay = QubitLayout(2, 2)
    amps = np.zeros(lay.dim)
    amps[lay.index(0, 0)] = np.sqrt(0.5)
    amps[lay.index(1, 1)] = np.sqrt(0.3)
    amps[lay.index(2, 3)] = np.sqrt(0.2)
    s = StateVector(amps, lay)
    n = 40_000
    _, rows = measure_register_and_reset(s.tile(n), substream(5, "rows"))
    h_rows = sample_trajectories(rows, substream(5, "rows2"))
    ens, mult = measure_and_reset_ensemble(s.tile(1), [n], substream(5, "ens"))
    ens, mult = merge_duplicates(ens, mult)
    h_ens = sample_positions_ensemble(ens, mult, substream(5, "ens2"))
    assert h_rows.shots == h_ens.shots == n
    p = np.array([0.5, 0.3, 0, 0.2])
    tol = 5 * np.sqrt(p * (1 - p) / n) * n
    assert np.all(np.abs(h_rows.counts - p * n) <= tol)
    assert np.all(np.abs(h_ens.counts - p * n) <= tol)


def test_merge_duplicates_adds_multiplicity():
    lay = QubitLayout(1, 1)
    a = np.array([[1.0, 0, 0, 0], [1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    s, m = merge_duplicates(StateVector(a, lay), [2, 3, 4])
    assert sorted(m.tolist()) == [4, 5]
    assert s.amplitudes.shape == (2, 4)


# ---- engine invariants (1,000 randomized cases each) ----

N_CASES = 1000


def _random_gate(rng, lay):
    n = lay.n_qubits
    target = int(rng.integers(n))
    others = [q for q in range(n) if q != target]
    k = int(rng.integers(0, min(3, len(others)) + 1))
    qs = rng.choice(others, size=k, replace=False)
    kind = ["RY", "X", "H"][int(rng.integers(3))]
    theta = float(rng.uniform(-2 * np.pi, 2 * np.pi)) if kind == "RY" else None
    return GateSpec(kind, target, [(int(q), int(rng.integers(2))) for q in qs], theta)


def test_property_unitarity():
    rng = np.random.default_rng(1)
    for _ in range(N_CASES):
        lay = QubitLayout(int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        s = StateVector(random_state(rng, lay.dim), lay)
        out = apply_gate(s, _random_gate(rng, lay))
        assert abs(out.norm() - 1) < 1e-12


def test_property_shift_is_permutation():
    rng = np.random.default_rng(2)
    for _ in range(N_CASES):
        lay = QubitLayout(int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        s = StateVector(random_state(rng, lay.dim), lay)
        js = [j for j in range(1, lay.f_qubits + 1) if rng.random() < 0.5]
        ctl = [(lay.f_qubit(j), int(rng.integers(2))) for j in js]
        out = apply_cyclic_shift(s, ["positive", "negative"][int(rng.integers(2))], ctl)
        np.testing.assert_array_equal(np.sort(np.abs(out.amplitudes)), np.sort(np.abs(s.amplitudes)))


def test_property_control_correctness():
    rng = np.random.default_rng(3)
    for _ in range(N_CASES):
        lay = QubitLayout(int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        s = StateVector(random_state(rng, lay.dim), lay)
        g = _random_gate(rng, lay)
        back = apply_gate(apply_gate(s, g), g.inverse())
        assert np.max(np.abs(back.amplitudes - s.amplitudes)) < 1e-12


def test_property_measurement_partition():
    rng = np.random.default_rng(4)
    for _ in range(N_CASES):
        lay = QubitLayout(int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        s = StateVector(random_state(rng, lay.dim), lay)
        assert abs(register_probabilities(s).sum() - 1) < 1e-12
        _, post = measure_register_and_reset(s, rng)
        assert abs(post.norm() - 1) < 1e-12
        assert np.all(post.grid()[1:] == 0)


def _marginal_propagation(ops, lay, psi_pos):
    def run(state):
        for op in ops:
            state = apply_gate(state, op[1]) if op[0] == "gate" else apply_cyclic_shift(state, op[1], op[2])
        return position_probabilities(state)

    # response to each basis position gives the linear propagation matrix
    cols = np.array([run(StateVector.basis(lay, 0, k)) for k in range(lay.n_cells)]).T
    psi = np.zeros(lay.dim, dtype=complex)
    psi[: lay.n_cells] = psi_pos
    return run(StateVector(psi, lay)), cols @ np.abs(psi_pos) ** 2


def _random_step(rng, lay, n_rot=4, n_shift=4):
    ops = []
    for _ in range(n_rot):
        j = int(rng.integers(1, lay.f_qubits + 1))
        others = [i for i in range(1, lay.f_qubits + 1) if i != j and rng.random() < 0.5]
        ops.append(("gate", GateSpec("RY", lay.f_qubit(j), lay.pattern_controls(int(rng.integers(8)), others),
                                     float(rng.uniform(-3, 3)))))
    for _ in range(n_shift):
        ops.append(("shift", ["positive", "negative"][int(rng.integers(2))],
                    lay.pattern_controls(int(rng.integers(lay.n_patterns)))))
    return ops


def test_property_no_interference_across_positions():
    """Rotations on a reset f-register followed by conditioned shifts act linearly
    on position marginals (the structure of one QLBM step)."""
    rng = np.random.default_rng(5)
    for _ in range(200):
        lay = QubitLayout(int(rng.integers(2, 4)), int(rng.integers(1, 5)))
        full, marg = _marginal_propagation(_random_step(rng, lay), lay, random_state(rng, lay.n_cells))
        np.testing.assert_allclose(full, marg, atol=1e-12)


def test_rotation_after_shift_can_interfere():
    """Counter-example: the property needs the rotations to precede all shifts."""
    lay = QubitLayout(1, 2)
    q = lay.f_qubit(1)
    hop = [("gate", GateSpec("H", q)), ("shift", "positive", lay.pattern_controls(1))]
    full, marg = _marginal_propagation(hop + hop, lay, np.sqrt([0.4, 0.3, 0.2, 0.1]))
    assert np.max(np.abs(full - marg)) > 0.05
