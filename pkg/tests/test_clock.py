import math

import numpy as np
import pytest

from simforge import clock as ck
from simforge import operators as op
from simforge import simulation as sim
from simforge.errors import SimforgeError


def haar_unitary(dim, rng):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(T, rng):
    steps = []
    for _ in range(T):
        if rng.random() < 0.5:
            steps.append(ck.Gate("u1", (int(rng.integers(2)),), haar_unitary(2, rng)))
        else:
            steps.append(ck.Gate("u2", (0, 1), haar_unitary(4, rng)))
    return ck.GateSequence(register=(2, 2), steps=steps)


# ------------------------------------------------------------------- clocks

def test_identity_single_step_ground():
    seq = ck.GateSequence(register=(2,), steps=[ck.Gate("id", (0,), np.eye(2))])
    H = op.assemble(ck.clock_hamiltonian(seq))
    w, v = np.linalg.eigh(H)
    assert abs(w[0]) <= 1e-12
    want = np.zeros(4, dtype=complex)
    want[0] = want[2] = 1 / math.sqrt(2)   # (|0> + |1>) clock, register |0>
    assert abs(abs(np.vdot(v[:, 0], want)) - 1.0) <= 1e-10


def test_history_state_norm_and_ground_overlap():
    rng = np.random.default_rng(11)
    for T in (3, 7, 12):
        seq = random_circuit(T, rng)
        psi = ck.history_state(seq)
        assert abs(np.linalg.norm(psi) - 1.0) <= 1e-12
        H = op.assemble(ck.clock_hamiltonian(seq))
        assert np.linalg.norm(H @ psi) <= 1e-10
        w, v = np.linalg.eigh(H)
        assert w[0] >= -1e-10          # positive semidefinite
        assert abs(w[0]) <= 1e-10
        overlap = abs(np.vdot(v[:, 0], psi))
        assert overlap >= 1 - 1e-10
        assert w[1] > 1e-8             # unique ground


def test_wrong_input_state_is_orthogonal():
    rng = np.random.default_rng(3)
    seq = random_circuit(4, rng)
    flipped = np.zeros(2, dtype=complex)
    flipped[1] = 1.0
    wrong = ck.GateSequence(register=(2, 2), steps=seq.steps,
                            input_states=(flipped, seq.input_states[1]))
    H = op.assemble(ck.clock_hamiltonian(seq))
    psi_wrong = ck.history_state(wrong)
    w, v = np.linalg.eigh(H)
    assert abs(np.vdot(v[:, 0], psi_wrong)) <= 1e-10


def test_gap_closed_form():
    assert math.isclose(ck.clock_gap(4), 2 * (1 - math.cos(math.pi / 5)), abs_tol=1e-10)
    assert math.isclose(ck.clock_gap(1), 2.0, abs_tol=1e-10)


def test_gap_law_window():
    for T, gap, scaled in ck.gap_scan([16, 32, 64]):
        exact = 2 * (1 - math.cos(math.pi / (T + 1)))
        assert math.isclose(gap, exact, rel_tol=1e-9)
        assert 0.9 * math.pi**2 <= scaled <= 1.1 * math.pi**2


# ------------------------------------------------------------------- snakes

def test_snake_single_cell():
    p = ck.snake_path(1)
    assert p.cells == ((0, 0),)
    assert p.schedule == ()


def test_snake_side_three():
    p = ck.snake_path(3)
    assert len(p.cells) == 6
    assert len(p.turns) == 2
    for a, b in zip(p.cells, p.cells[1:]):
        assert abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1
    # direction alternates per row
    assert p.cells[:3] == ((0, 0), (1, 0), (2, 0))
    assert p.cells[3:5] == ((1, 1), (0, 1))


def test_snake_schedule_replay():
    for side in (2, 3, 5):
        p = ck.snake_path(side)
        assert ck.replay_schedule(p) == p.cells


# ---------------------------------------------------------------- synthesis

def test_synthesis_trivial_angles():
    res = ck.synthesize_rotation(0.0, 0.01)
    assert res.word == () and res.achieved == 0.0
    res = ck.synthesize_rotation(math.pi / 2, 0.01)
    assert res.success and len(res.word) == 1
    assert res.achieved <= 1e-12


def test_synthesis_pi_over_seven():
    res = ck.synthesize_rotation(math.pi / 7, 0.01)
    assert res.success
    assert len(res.word) <= 40
    target = np.array([math.cos(math.pi / 7), math.sin(math.pi / 7)])
    assert np.linalg.norm(res.state / (res.state[0] / abs(res.state[0])) - target) <= 0.011


def test_synthesis_budget_exhaustion_reports_best():
    res = ck.synthesize_rotation(math.pi / 7, 1e-6, max_len=4)
    assert not res.success
    assert res.achieved > 1e-6


# ------------------------------------------------------------ field programs

def grid_of(alpha, beta, n, delta2=1.0):
    return sim.CouplingGrid(n=n, alpha=alpha, beta=beta, delta2=delta2)


def test_field_program_single_cell():
    g = grid_of(np.array([[0.5]]), np.zeros((1, 1)), 1)
    angles = ck.AngleField(g, eps=0.1)
    prog = ck.field_program(angles, ck.snake_path(1))
    state = ck.replay(prog.sequence)
    qa, qb = prog.cell_qubits[(0, 0)]
    tensor = state.reshape(prog.sequence.register)
    p1 = float(np.vdot(tensor[1, :], tensor[1, :]).real)
    assert abs(p1 - 0.5) <= angles.delta_tol + 1e-12
    pb = float(np.vdot(tensor[:, 1], tensor[:, 1]).real)
    assert pb <= 1e-24


def test_field_program_zero_couplings_identity():
    g = grid_of(np.zeros((1, 1)), np.zeros((1, 1)), 1)
    prog = ck.field_program(ck.AngleField(g, eps=0.1), ck.snake_path(1))
    assert prog.sequence.T == 0


def test_field_program_two_by_two_total_error():
    alpha = np.array([[0.5, 0.125], [0.25, 0.375]])
    beta = np.array([[0.0625, 0.5], [0.1875, 0.25]])
    g = grid_of(alpha, beta, 2)
    angles = ck.AngleField(g, eps=0.1)
    prog = ck.field_program(angles, ck.snake_path(3))
    assert angles.delta_tol == 0.1 / (4 * 1.0 * 4)
    for errs in prog.achieved.values():
        assert max(errs) <= angles.delta_tol
    state = ck.replay(prog.sequence)
    target = ck.target_field_state(angles, prog)
    # each word prepares its state up to a phase; align the accumulated one
    phase = np.vdot(target, state)
    state = state * (phase.conjugate() / abs(phase))
    assert np.linalg.norm(state - target) <= 8 * angles.delta_tol


def test_field_program_requires_coverage():
    g = grid_of(np.zeros((2, 2)), np.zeros((2, 2)), 2)
    with pytest.raises(SimforgeError):
        ck.field_program(ck.AngleField(g, eps=0.1), ck.snake_path(2))


# ---------------------------------------------------------------- blinking

def blink_for(coupling, n=1):
    alpha = np.zeros((n, n))
    alpha[0, 0] = coupling
    g = grid_of(alpha, np.zeros((n, n)), n)
    angles = ck.AngleField(g, eps=0.1)
    prog = ck.field_program(angles, ck.snake_path(max(1, 2 * n - 1)))
    return ck.blink_schedule(prog, (0, 0)), prog, angles


def test_blink_full_and_empty():
    blink, _, _ = blink_for(1.0)
    assert blink.T % 2 == 1
    assert blink.on_states * 2 == blink.T + 1
    assert abs(ck.blink_expectation(blink) - 0.5) <= 1e-12
    blink0, _, _ = blink_for(0.0)
    assert ck.blink_expectation(blink0) <= 1e-12


def test_blink_half_amplitude():
    blink, prog, angles = blink_for(0.5)
    e = ck.blink_expectation(blink)
    assert abs(e - 0.25) <= 1e-8


def test_blink_matches_achieved_amplitude_exactly():
    blink, prog, _ = blink_for(0.375)
    qa = prog.cell_qubits[(0, 0)][0]
    state = ck.replay(prog.sequence)
    tensor = state.reshape(prog.sequence.register)
    amp = float(np.vdot(np.take(tensor, 1, axis=qa), np.take(tensor, 1, axis=qa)).real)
    assert abs(ck.blink_expectation(blink) - amp / 2) <= 1e-12


def test_blink_flag_cell_validation():
    _, prog, _ = blink_for(0.5)
    with pytest.raises(SimforgeError):
        ck.blink_schedule(prog, (5, 5))


def test_blink_history_ground_expectation():
    # the clock-Hamiltonian ground state reproduces the replay expectation
    blink, _, _ = blink_for(0.5)
    H = op.assemble(ck.clock_hamiltonian(blink.sequence))
    w, v = np.linalg.eigh(H)
    assert abs(w[0]) <= 1e-10
    g = v[:, 0]
    dims = (blink.T + 1,) + blink.sequence.register
    tensor = g.reshape(dims)
    moved = np.moveaxis(tensor, [1 + blink.flag_qubit, 1 + blink.marker_qubit], [0, 1])
    expect = float(np.vdot(moved[1, 1], moved[1, 1]).real)
    assert abs(expect - 0.25) <= 1e-8


# ------------------------------------------------------------ periodic maps

def test_periodic_layout_counts():
    m = ck.periodic_layout(1, 3, 4, 4)
    assert set(m.values()) == {(0, 0)} and len(m) == 9
    m = ck.periodic_layout(2, 2, 4, 4)
    assert len(m) == 16
    from collections import Counter
    assert set(Counter(m.values()).values()) == {4}
    with pytest.raises(SimforgeError):
        ck.periodic_layout(3, 2, 4, 4)


def test_periodic_program_replicates_patch():
    g = grid_of(np.array([[0.5]]), np.zeros((1, 1)), 1)
    angles = ck.AngleField(g, eps=0.1)
    m = ck.periodic_layout(1, 2, 4, 4)
    prog = ck.periodic_field_program(angles, m)
    state = ck.replay(prog.sequence)
    tensor = state.reshape(prog.sequence.register)
    for cell, (qa, qb) in prog.cell_qubits.items():
        p1 = float(np.vdot(np.take(tensor, 1, axis=qa), np.take(tensor, 1, axis=qa)).real)
        assert abs(p1 - 0.5) <= angles.delta_tol + 1e-12
