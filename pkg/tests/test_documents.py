import numpy as np
import pytest

from simforge import clock as ck
from simforge import documents as doc
from simforge import gadgets as gd
from simforge import geometry as geo
from simforge import operators as op
from simforge import tiles as tl
from simforge.errors import FormatError


def sample_hamiltonian():
    sys = op.SiteSystem([("q0", 2), ("q1", 2), ("a", 3)],
                        coords={"q0": (0.0, 0.0), "q1": (1.0, 0.0)})
    h = op.named_interaction("heisenberg")
    P = op.named_interaction("basis-projector", index=2, dim=3)
    rng = np.random.RandomState(5)
    M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    M = M + M.conj().T
    return op.HamiltonianExpr(sys, [
        op.LocalTerm(("q0", "q1"), h, 1.25),
        op.LocalTerm(("a",), P, -0.5),
        op.LocalTerm(("q1", "q0"), M, 0.75),
    ])


def test_hamiltonian_round_trip():
    expr = sample_hamiltonian()
    text = doc.emit_hamiltonian(expr)
    back = doc.parse_hamiltonian(text)
    assert back.system.ids == expr.system.ids
    assert back.system.dims == expr.system.dims
    assert back.system.coords == expr.system.coords
    assert len(back.terms) == len(expr.terms)
    for a, b in zip(back.terms, expr.terms):
        assert a.sites == tuple(str(s) for s in b.sites)
        assert a.coeff == b.coeff
        assert np.array_equal(a.op, b.op)
    # emission is a fixed point
    assert doc.emit_hamiltonian(back) == text


def test_hamiltonian_parse_errors():
    with pytest.raises(FormatError):
        doc.parse_hamiltonian("nonsense\nend\n")
    with pytest.raises(FormatError):
        doc.parse_hamiltonian("hamiltonian\nsite q0 dim x\nend\n")
    with pytest.raises(FormatError):
        doc.parse_hamiltonian("hamiltonian\nsite q0 dim 2\n")


def test_graph_round_trip():
    G = geo.hexagonal_lattice(3, 3)
    text = doc.emit_graph(G)
    back = doc.parse_graph(text)
    assert set(back.vertices) == set(G.vertices)
    assert back.edges == G.edges
    assert all(np.allclose(back.coords[v], G.coords[v]) for v in G.vertices)
    assert len(back.basis) == 2
    assert doc.emit_graph(back) == text


def test_plan_round_trip():
    plan = gd.GadgetPlan(rounds=[
        [gd.PlannedGadget("subdiv", ("q0", "q1"), lam=0.5, mediators=("m0", "m1"))],
        [gd.PlannedGadget("fork", ("a", "b", "c"), lam=1.0, mu=-0.25),
         gd.PlannedGadget("crossing", (("p", "s"), ("q", "r")), lam=1.0, mu=1.0)],
    ], delta_base=1e6)
    text = doc.emit_plan(plan)
    back = doc.parse_plan(text)
    assert back.deltas == plan.deltas
    assert back.depth == plan.depth
    assert back.rounds[0][0].mediators == ("m0", "m1")
    assert back.rounds[1][1].sites == (("p", "s"), ("q", "r"))
    assert doc.emit_plan(back) == text


def test_tileset_round_trip():
    ts = tl.marker_tileset()
    text = doc.emit_tileset(ts)
    back = doc.parse_tileset(text)
    assert back.labels == ts.labels
    assert back.boundary == ts.boundary
    assert [t.weight for t in back.tiles] == [t.weight for t in ts.tiles]
    assert doc.emit_tileset(back) == text
    counter = tl.binary_counter_tileset()
    back2 = doc.parse_tileset(doc.emit_tileset(counter))
    assert back2.tiles == counter.tiles


def test_gates_round_trip():
    rng = np.random.RandomState(0)
    z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, _ = np.linalg.qr(z)
    seq = ck.GateSequence(register=(2, 2), steps=[
        ck.Gate("h", (0,), ck.SYNTH_GATES["h"]),
        ck.WAIT,
        ck.Gate("u2", (0, 1), q),
    ])
    text = doc.emit_gates(seq)
    back = doc.parse_gates(text)
    assert back.register == seq.register
    assert back.T == seq.T
    assert np.allclose(back.steps[2].matrix, q)
    assert doc.emit_gates(back) == text


def test_report_emission_deterministic():
    from simforge import simulation as sim
    sys2 = op.SiteSystem([(0, 2), (1, 2)])
    H = op.HamiltonianExpr(sys2, [op.LocalTerm((0, 1), op.named_interaction("heisenberg"))])
    V = sim.LocalIsometry.identity(sys2)
    r1 = sim.verify_simulation(H, H, delta=4.0, eta=0.1, eps=0.1, isometry=V)
    r2 = sim.verify_simulation(H, H, delta=4.0, eta=0.1, eps=0.1, isometry=V)
    assert doc.emit_report(r1, "x") == doc.emit_report(r2, "x")
