"""History-state Hamiltonians at desk scale.

A computation U_T ... U_1 on a small register becomes a Hamiltonian on a
unary clock register (dimension T+1) tensored with the computation register:
one positive-semidefinite transition term per step plus an input penalty at
clock value 0.  The unique zero-energy ground state is the uniform history
state over the T+1 partial computations.

The unary clock isolates the spectral analysis (gap ~ pi^2/(T+1)^2, the
path-graph Laplacian law) from the tiling machinery; the two-dimensional
head motion that embeds such a clock into a lattice is exercised separately
through snake layouts and their turn-around schedules.

Rotation synthesis is a bounded breadth-first search over words from a
fixed universal single-qubit set, replacing asymptotic compilation with the
same (angle, tolerance) -> word interface.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SimforgeError
from .operators import HamiltonianExpr, LocalTerm, SiteSystem

UNITARY_TOL = 1e-12

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_T = np.diag([1.0, np.exp(1j * math.pi / 4)]).astype(complex)
SYNTH_GATES = {
    "h": _H,
    "t": _T,
    "tdg": _T.conj().T,
    "s": _T @ _T,
    "sdg": (_T @ _T).conj().T,
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
}


@dataclass(frozen=True)
class Gate:
    """One step: a unitary on at most two register cells ('' cells = wait)."""

    name: str
    cells: tuple
    matrix: np.ndarray

    def __post_init__(self):
        if len(self.cells) > 2:
            raise SimforgeError("steps act on at most two cells")
        m = np.asarray(self.matrix, dtype=complex)
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > UNITARY_TOL:
            raise SimforgeError(f"step {self.name!r} is not unitary")
        object.__setattr__(self, "matrix", m)


WAIT = Gate("wait", (), np.ones((1, 1), dtype=complex))


@dataclass
class GateSequence:
    """Ordered steps on a register of qudit cells, with a product input."""

    register: tuple                      # local dimension per cell
    steps: tuple = ()
    input_states: tuple = None           # per-cell vectors; default |0> each

    def __post_init__(self):
        self.register = tuple(int(d) for d in self.register)
        self.steps = tuple(self.steps)
        if self.input_states is None:
            states = []
            for d in self.register:
                v = np.zeros(d, dtype=complex)
                v[0] = 1.0
                states.append(v)
            self.input_states = tuple(states)
        for g in self.steps:
            for c in g.cells:
                if not 0 <= c < len(self.register):
                    raise SimforgeError(f"step {g.name!r} touches unknown cell {c}")
            want = 1
            for c in g.cells:
                want *= self.register[c]
            if g.matrix.shape[0] != want:
                raise SimforgeError(f"step {g.name!r} dimension mismatch")

    @property
    def T(self):
        return len(self.steps)

    def input_vector(self):
        out = np.ones(1, dtype=complex)
        for v in self.input_states:
            out = np.kron(out, v)
        return out


def _apply_gate(state, dims, gate):
    if not gate.cells:
        return state
    tensor = state.reshape(dims)
    axes = list(gate.cells)
    d_op = int(np.prod([dims[c] for c in axes]))
    moved = np.moveaxis(tensor, axes, range(len(axes)))
    shape = moved.shape
    flat = moved.reshape(d_op, -1)
    flat = gate.matrix @ flat
    moved = flat.reshape(shape)
    return np.moveaxis(moved, range(len(axes)), axes).reshape(-1)


def replay(seq):
    """Statevector of the register after all steps."""
    state = seq.input_vector()
    for g in seq.steps:
        state = _apply_gate(state, seq.register, g)
    return state


def partial_states(seq):
    """Register states after 0, 1, ..., T steps."""
    out = [seq.input_vector()]
    for g in seq.steps:
        out.append(_apply_gate(out[-1], seq.register, g))
    return out


CLOCK_SITE = "clk"


def _cell_site(c):
    return f"q{c}"


def clock_system(seq):
    sites = [(CLOCK_SITE, seq.T + 1)]
    sites += [(_cell_site(c), d) for c, d in enumerate(seq.register)]
    return SiteSystem(sites)


def clock_hamiltonian(seq, *, input_penalty=True):
    """Transition terms plus (optionally) the clock-0 input penalty.

    The penalty is applied per register cell (clock projector tensored with
    the complement of that cell's input state), which keeps every term on
    at most three sites and selects the same unique history-state ground.
    """
    if seq.T < 1:
        raise SimforgeError("need at least one step")
    system = clock_system(seq)
    Tn = seq.T + 1
    terms = []
    for t, g in enumerate(seq.steps, start=1):
        A = np.zeros((Tn, Tn), dtype=complex)
        A[t - 1, t - 1] = 1.0
        A[t, t] = 1.0
        B = np.zeros((Tn, Tn), dtype=complex)
        B[t, t - 1] = 1.0   # |t><t-1|
        if g.cells:
            op = (np.kron(A, np.eye(g.matrix.shape[0]))
                  - np.kron(B, g.matrix) - np.kron(B.conj().T, g.matrix.conj().T))
            support = (CLOCK_SITE,) + tuple(_cell_site(c) for c in g.cells)
        else:
            op = A - B - B.conj().T
            support = (CLOCK_SITE,)
        terms.append(LocalTerm(support, op, 1.0))
    if input_penalty and seq.register:
        P0 = np.zeros((Tn, Tn), dtype=complex)
        P0[0, 0] = 1.0
        for c, v in enumerate(seq.input_states):
            pen = np.eye(len(v)) - np.outer(v, v.conj())
            terms.append(LocalTerm((CLOCK_SITE, _cell_site(c)), np.kron(P0, pen), 1.0))
    return HamiltonianExpr(system, terms)


def history_state(seq):
    """(T+1)^(-1/2) sum_t |t> (x) U_t ... U_1 |psi_in>."""
    parts = partial_states(seq)
    Tn = seq.T + 1
    dreg = len(parts[0])
    out = np.zeros(Tn * dreg, dtype=complex)
    for t, psi in enumerate(parts):
        out[t * dreg:(t + 1) * dreg] = psi
    return out / math.sqrt(Tn)


def clock_gap(T):
    """Spectral gap of the bare T-step clock (path-graph Laplacian)."""
    seq = GateSequence(register=(), steps=[WAIT] * T)
    H = clock_hamiltonian(seq, input_penalty=False)
    from .operators import assemble
    w = np.linalg.eigvalsh(assemble(H))
    return float(w[1] - w[0])


def gap_scan(t_values):
    """(T, gap, gap*(T+1)^2) rows; the last column hovers near pi^2."""
    rows = []
    for T in t_values:
        g = clock_gap(int(T))
        rows.append((int(T), g, g * (T + 1) ** 2))
    return rows


# ------------------------------------------------------------------ layouts

@dataclass
class SnakePath:
    """Boustrophedon visit of the staircase triangle {(i, j): i + j < side}.

    Rows are walked bottom-up, direction alternating; a row change is a
    diagonal hand-off across the hypotenuse boundary, recorded as a turn.
    """

    side: int
    cells: tuple
    turns: tuple          # indices into cells where a turn lands
    schedule: tuple       # (kind, payload) steps; replaying tracks the head

    def __len__(self):
        return len(self.cells)


def snake_path(side):
    if side < 1:
        raise SimforgeError("triangle side must be >= 1")
    cells = []
    turns = []
    schedule = []
    for j in range(side):
        row = [(i, j) for i in range(side - j)]
        if j % 2 == 1:
            row.reverse()
        if cells:
            prev = cells[-1]
            turns.append(len(cells))
            # three-phase hand-off: the head leaves the finished row, a
            # boundary marker carries it across, and it lands one row up
            schedule.append(("turn-release", (prev,)))
            schedule.append(("turn-carry", (prev, row[0])))
            schedule.append(("turn-land", (row[0],)))
        for a, b in zip(row, row[1:]):
            schedule.append(("move", (a, b)))
        cells.extend(row)
    return SnakePath(side, tuple(cells), tuple(turns), tuple(schedule))


def replay_schedule(path):
    """Head positions produced by walking the schedule; equals the cell order."""
    if not path.cells:
        return ()
    pos = [path.cells[0]]
    for kind, payload in path.schedule:
        if kind == "move":
            a, b = payload
            if pos[-1] != a:
                raise SimforgeError("schedule move does not start at the head")
            pos.append(b)
        elif kind == "turn-carry":
            a, b = payload
            if pos[-1] != a:
                raise SimforgeError("schedule turn does not start at the head")
            pos.append(b)
    return tuple(pos)


# ---------------------------------------------------------------- synthesis

@dataclass
class SynthesisResult:
    word: tuple
    achieved: float
    state: np.ndarray
    success: bool


def _canonical_phase(states):
    idx = np.argmax(np.abs(states), axis=1)
    lead = states[np.arange(len(states)), idx]
    phase = lead / np.abs(lead)
    return states / phase[:, None]


def synthesize_rotation(theta, delta, *, max_len=40, grid=None):
    """Shortest found gate word with || U|0> - (cos t, sin t) || <= delta.

    Breadth-first search over words from ``SYNTH_GATES`` with states deduped
    on a grid of pitch delta/4 (global phase canonicalized).  On budget
    exhaustion the best reachable word is reported with ``success=False``.
    """
    if delta <= 0:
        raise SimforgeError("delta must be positive")
    pitch = grid or delta / 4.0
    target = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    names = sorted(SYNTH_GATES)
    mats = np.stack([SYNTH_GATES[k] for k in names])
    frontier = _canonical_phase(np.array([[1.0 + 0j, 0.0]]))
    words = [()]
    seen = set()

    def keys(states):
        q = np.round(states.view(np.float64).reshape(len(states), 4) / pitch)
        return [tuple(int(x) for x in row) for row in q]

    seen.update(keys(frontier))
    best = (float(np.linalg.norm(frontier[0] - target)), ())
    for depth in range(max_len + 1):
        dist = np.linalg.norm(frontier - target[None, :], axis=1)
        k = int(np.argmin(dist))
        if dist[k] < best[0]:
            best = (float(dist[k]), words[k])
        if best[0] <= delta:
            w = best[1]
            return SynthesisResult(w, best[0], _word_state(w), True)
        if depth == max_len:
            break
        new = np.einsum("gab,nb->gna", mats, frontier).reshape(-1, 2)
        new_words = [w + (names[g],) for g in range(len(names)) for w in words]
        new = _canonical_phase(new)
        kept = []
        for i, key in enumerate(keys(new)):
            if key not in seen:
                seen.add(key)
                kept.append(i)
        frontier = new[kept]
        words = [new_words[i] for i in kept]
        if not len(frontier):
            break
    return SynthesisResult(best[1], best[0], _word_state(best[1]), False)


def _word_state(word):
    """Phase-canonical state prepared by a word (distances are ray distances)."""
    v = np.array([1.0, 0.0], dtype=complex)
    for name in word:
        v = SYNTH_GATES[name] @ v
    return _canonical_phase(v.reshape(1, 2))[0]


# ------------------------------------------------------------ field programs

@dataclass
class AngleField:
    """Target rotation angles theta = arcsin(sqrt(coupling/Delta2)) per cell.

    With this convention |<1|theta>|^2 equals the normalized coupling, so
    blink expectations are linear in it.  The synthesis tolerance is
    eps/(4*Delta2*n^2).
    """

    grid: object           # CouplingGrid
    eps: float

    @property
    def delta_tol(self):
        g = self.grid
        return self.eps / (4.0 * g.delta2 * g.n**2)

    def theta(self, i, j, which):
        g = self.grid
        val = g.alpha[i, j] if which == "alpha" else g.beta[i, j]
        return math.asin(math.sqrt(val / g.delta2))


@dataclass
class FieldProgram:
    sequence: GateSequence
    cell_qubits: dict          # (i, j) -> (alpha qubit, beta qubit)
    achieved: dict             # (i, j) -> (err_alpha, err_beta)
    layout: SnakePath


def field_program(angles, layout, *, max_len=40):
    """Gate program writing the angle field onto the square-region cells.

    Visits the layout's cells in snake order; for each cell inside the
    coupling grid's n x n corner it appends the synthesized words for the
    alpha and beta angles on that cell's two qubits.
    """
    n = angles.grid.n
    square = [c for c in layout.cells if c[0] < n and c[1] < n]
    if len(square) < n * n:
        raise SimforgeError("layout does not cover the coupling grid")
    cell_qubits = {}
    register = []
    for k, c in enumerate(square):
        cell_qubits[c] = (2 * k, 2 * k + 1)
        register += [2, 2]
    steps = []
    achieved = {}
    for c in square:
        qa, qb = cell_qubits[c]
        errs = []
        for which, q in (("alpha", qa), ("beta", qb)):
            theta = angles.theta(c[0], c[1], which)
            res = synthesize_rotation(theta, angles.delta_tol, max_len=max_len)
            if not res.success:
                raise SimforgeError(
                    f"synthesis budget exhausted at cell {c} ({which}): "
                    f"best {res.achieved:.2e} > {angles.delta_tol:.2e}")
            errs.append(res.achieved)
            for name in res.word:
                steps.append(Gate(name, (q,), SYNTH_GATES[name]))
        achieved[c] = tuple(errs)
    seq = GateSequence(register=tuple(register), steps=steps)
    return FieldProgram(seq, cell_qubits, achieved, layout)


def target_field_state(angles, program):
    """Tensor product of the ideal per-qubit angle states, register order."""
    n = angles.grid.n
    out = np.ones(1, dtype=complex)
    order = sorted(program.cell_qubits.items(), key=lambda kv: kv[1][0])
    for (i, j), _ in order:
        for which in ("alpha", "beta"):
            th = angles.theta(i, j, which)
            out = np.kron(out, np.array([math.cos(th), math.sin(th)], dtype=complex))
    return out


# ---------------------------------------------------------------- blinking

@dataclass
class BlinkSchedule:
    sequence: GateSequence      # program + marker toggle + waits; T odd
    marker_qubit: int
    flag_qubit: int
    on_states: int              # clock states with the marker on: (T+1)/2

    @property
    def T(self):
        return self.sequence.T


def blink_schedule(program, flag_cell):
    """Augment a field program so a marker is on for exactly half the clock.

    One marker qubit is appended; after the program's own steps the marker
    flips and identity waits pad the sequence so the toggle sits exactly at
    the midpoint of an odd number of steps.  The history state then gives
    <P_flag (x) P_on> = (achieved flag amplitude^2) / 2.
    """
    seq = program.sequence
    if flag_cell not in program.cell_qubits:
        raise SimforgeError(f"flag cell {flag_cell} outside the programmed layout")
    flag_qubit = program.cell_qubits[flag_cell][0]
    marker = len(seq.register)
    register = seq.register + (2,)
    t0 = seq.T + 1           # one extra step: the toggle
    steps = list(seq.steps)
    steps.append(Gate("x", (marker,), SYNTH_GATES["x"]))
    steps += [WAIT] * (t0 - 1)
    total = len(steps)       # = 2*t0 - 1, always odd
    out = GateSequence(register=register, steps=steps)
    return BlinkSchedule(out, marker, flag_qubit, on_states=t0)


def blink_expectation(blink):
    """<history| P1_flag (x) P_on_marker |history>, computed by replay."""
    seq = blink.sequence
    states = partial_states(seq)
    Tn = seq.T + 1
    dims = seq.register
    total = 0.0
    for psi in states:
        tensor = psi.reshape(dims)
        moved = np.moveaxis(tensor, [blink.flag_qubit, blink.marker_qubit], [0, 1])
        amp = moved[1, 1]
        total += float(np.vdot(amp, amp).real)
    return total / Tn


# ------------------------------------------------------------ periodic maps

def periodic_layout(k, n, W, H):
    """Map each cell of the n*k x n*k patch to its k x k source cell."""
    if n * k > min(W, H):
        raise SimforgeError("periodic patch exceeds the lattice")
    return {(i, j): (i % k, j % k) for i in range(n * k) for j in range(n * k)}


def periodic_field_program(angles, layout_map, *, max_len=40):
    """Field program writing a k x k angle patch periodically.

    ``angles`` covers the k x k source grid; every mapped cell receives the
    words synthesized for its source.  Register order follows sorted cell
    order for determinism.
    """
    cells = sorted(layout_map)
    cell_qubits = {}
    register = []
    for idx, c in enumerate(cells):
        cell_qubits[c] = (2 * idx, 2 * idx + 1)
        register += [2, 2]
    steps = []
    achieved = {}
    words = {}
    for c in cells:
        src = layout_map[c]
        if src not in words:
            pair = {}
            for which in ("alpha", "beta"):
                th = angles.theta(src[0], src[1], which)
                res = synthesize_rotation(th, angles.delta_tol, max_len=max_len)
                if not res.success:
                    raise SimforgeError(f"synthesis budget exhausted for source {src}")
                pair[which] = res
            words[src] = pair
        qa, qb = cell_qubits[c]
        for which, q in (("alpha", qa), ("beta", qb)):
            res = words[src][which]
            for name in res.word:
                steps.append(Gate(name, (q,), SYNTH_GATES[name]))
        achieved[c] = (words[src]["alpha"].achieved, words[src]["beta"].achieved)
    seq = GateSequence(register=tuple(register), steps=steps)
    return FieldProgram(seq, cell_qubits, achieved, None)
