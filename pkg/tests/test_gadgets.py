import numpy as np
import pytest

from simforge import gadgets as gd
from simforge import operators as op
from simforge.errors import InterferenceError, SimforgeError


def family_expr(n, edges, family="heisenberg"):
    sys = op.SiteSystem([(k, 2) for k in range(n)])
    h = op.FAMILY_MATRIX[family]
    return op.HamiltonianExpr(sys, [op.LocalTerm(e, h, c) for e, c in edges])


def target_and_host(n, edges, family="heisenberg"):
    tgt = family_expr(n, edges, family)
    host = family_expr(n, edges, family)
    return tgt, host


# ------------------------------------------------------------- single gadgets

@pytest.mark.parametrize("family", ["heisenberg", "xy"])
def test_subdivision_positive_certifies(family):
    tgt, host = target_and_host(2, [((0, 1), 1.0)], family)
    out, app = gd.subdivide(host, (0, 1), 1.0, "+", 1e4, family=family)
    assert out.system.nsites == 4
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.1)
    assert rep.passed, rep.failure_reason()
    assert rep.low_dim == 4


@pytest.mark.parametrize("family", ["heisenberg", "xy"])
def test_subdivision_negative_certifies(family):
    tgt = family_expr(2, [((0, 1), -1.0)], family)
    host = family_expr(2, [], family)
    out, app = gd.subdivide(host, (0, 1), 1.0, "-", 1e4, family=family)
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.1)
    assert rep.passed, rep.failure_reason()


def test_subdivision_consumes_target_term():
    tgt, host = target_and_host(2, [((0, 1), 0.7)])
    out, app = gd.subdivide(host, (0, 1), 0.7, "+", 1e4)
    assert app.removed
    # no remaining direct (0,1) term
    assert all(set(t.sites) != {0, 1} for t in out.terms)


def test_subdivision_rejects_degenerate_and_collision():
    _, host = target_and_host(2, [((0, 1), 1.0)])
    with pytest.raises(SimforgeError):
        gd.subdivide(host, (0, 1), 0.0, "+", 1e4)
    out, _ = gd.subdivide(host, (0, 1), 1.0, "+", 1e4)
    with pytest.raises(SimforgeError):
        gd.subdivide(out, (0, 1), 1.0, "+", 1e3, mediators=("m0", "m1"))


def test_gadget_structure_invariants():
    # two more sites than the input; heavy terms carry coefficient exactly delta
    _, host = target_and_host(3, [((0, 2), 1.0), ((1, 2), 1.0)])
    out, app = gd.fork(host, (0, 1, 2), 1.0, 1.0, 1e5)
    assert out.system.nsites == host.system.nsites + 2
    heavy = [t for t in out.terms if set(t.sites) == set(app.mediators)]
    assert len(heavy) == 1 and heavy[0].coeff == 1e5


@pytest.mark.parametrize("family", ["heisenberg", "xy"])
def test_fork_certifies(family):
    tgt, host = target_and_host(3, [((0, 2), 1.0), ((1, 2), 1.0)], family)
    out, app = gd.fork(host, (0, 1, 2), 1.0, 1.0, 1e5, family=family)
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.05)
    assert rep.passed, f"{family}: eps={rep.eps_achieved}"


def test_fork_mixed_signs():
    tgt, host = target_and_host(3, [((0, 2), -1.0), ((1, 2), 1.0)])
    out, app = gd.fork(host, (0, 1, 2), -1.0, 1.0, 1e5)
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.05)
    assert rep.passed


def test_fork_mu_zero_is_subdivision_like():
    tgt, host = target_and_host(3, [((0, 2), 1.0)])
    out, app = gd.fork(host, (0, 1, 2), 1.0, 0.0, 1e5)
    assert not app.compensation
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.05)
    assert rep.passed


@pytest.mark.parametrize("family", ["heisenberg", "xy"])
def test_crossing_certifies(family):
    tgt, host = target_and_host(4, [((0, 3), 1.0), ((1, 2), 1.0)], family)
    out, app = gd.crossing(host, ((0, 3), (1, 2)), 1.0, 1.0, 1e5, family=family)
    rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.1)
    assert rep.passed, f"{family}: eps={rep.eps_achieved}"


def test_crossing_zero_couplings_cancels_exactly():
    # lam = mu = 0: the h12 compensation exists to cancel the second-order
    # cross-talk of the two legs sharing mediator a, so the low-energy
    # theory is zero, not h12
    zero_tgt = family_expr(4, [])
    host = family_expr(4, [])
    out, app = gd.crossing(host, ((0, 3), (1, 2)), 0.0, 0.0, 1e5)
    rep = gd.certify(out, [app], zero_tgt, eta=0.05, eps=0.05)
    assert rep.passed
    h12_tgt = family_expr(4, [((0, 1), 1.0)])
    rep_bad = gd.certify(out, [app], h12_tgt, eta=0.05, eps=0.05)
    assert not rep_bad.pass_eps


def test_crossing_label_swap_spectrum():
    _, host1 = target_and_host(4, [])
    out1, _ = gd.crossing(host1, ((0, 3), (1, 2)), 0.5, 0.25, 1e4)
    _, host2 = target_and_host(4, [])
    out2, _ = gd.crossing(host2, ((0, 2), (1, 3)), 0.25, 0.5, 1e4)
    w1 = np.linalg.eigvalsh(op.assemble(out1))
    w2 = np.linalg.eigvalsh(op.assemble(out2))
    assert np.allclose(w1, w2, atol=1e-8)


def test_family_uniformity_thresholds():
    # both families clear the same thresholds at the same heavy scale
    for family in ("heisenberg", "xy"):
        tgt, host = target_and_host(2, [((0, 1), 1.0)], family)
        out, app = gd.subdivide(host, (0, 1), 1.0, "+", 1e4, family=family)
        rep = gd.certify(out, [app], tgt, eta=0.05, eps=0.1)
        assert rep.passed


# ---------------------------------------------------------------------- plans

def test_empty_plan_identity():
    tgt, host = target_and_host(2, [((0, 1), 1.0)])
    plan = gd.GadgetPlan(rounds=[], delta_base=1e4, deltas=())
    out, apps, ledger = gd.apply_plan(host, plan)
    assert out is host or out.terms == host.terms
    assert not apps and not ledger


def test_parallel_round_two_subdivisions():
    edges = [((0, 1), 1.0), ((2, 3), 1.0)]
    plan = gd.GadgetPlan(rounds=[[gd.PlannedGadget("subdiv", (0, 1)),
                                  gd.PlannedGadget("subdiv", (2, 3))]],
                         delta_base=1e4, deltas=(1e4,))
    # XY legs are exact at second order; both gadgets certify jointly
    tgt, host = target_and_host(4, edges, "xy")
    out, apps, ledger = gd.apply_plan(host, plan, family="xy")
    assert out.system.nsites == 8
    rep = gd.certify(out, apps, tgt, eta=0.1, eps=0.15)
    assert rep.passed, rep.eps_achieved
    # Heisenberg errors add across disjoint gadgets, staying within twice
    # the single-gadget error at the same heavy scale
    tgt, host = target_and_host(4, edges)
    out, apps, _ = gd.apply_plan(host, plan)
    rep2 = gd.certify(out, apps, tgt, eta=0.1, eps=0.25)
    assert rep2.passed, rep2.eps_achieved
    tgt1, host1 = target_and_host(2, [((0, 1), 1.0)])
    single, app1 = gd.subdivide(host1, (0, 1), 1.0, "+", 1e4)
    rep1 = gd.certify(single, [app1], tgt1, eta=0.1, eps=0.25)
    assert rep2.eps_achieved <= 2.2 * rep1.eps_achieved


def test_round_interference_detection():
    plan = gd.GadgetPlan(rounds=[[gd.PlannedGadget("subdiv", (0, 1)),
                                  gd.PlannedGadget("subdiv", (1, 0))]],
                         delta_base=1e4, deltas=(1e4,))
    _, host = target_and_host(2, [((0, 1), 1.0)])
    with pytest.raises(InterferenceError):
        gd.apply_plan(host, plan)


def test_two_round_chain_certifies():
    # re-subdivide the first leg of an inner subdivision; outer scale dominates
    tgt, host = target_and_host(2, [((0, 1), 1.0)])
    inner_delta, outer_delta = 1e3, 1e6
    mid, app1 = gd.subdivide(host, (0, 1), 1.0, "+", inner_delta, symmetric=True)
    leg_sites, leg_coeff = app1.legs[0]
    plan_round = [gd.PlannedGadget("subdiv", tuple(leg_sites), lam=leg_coeff, symmetric=True)]
    plan = gd.GadgetPlan(rounds=[plan_round], delta_base=outer_delta, deltas=(outer_delta,))
    out, apps, _ = gd.apply_plan(mid, plan)
    rep = gd.certify(out, [app1] + apps, tgt, eta=0.1, eps=1.0, shift="fit")
    assert rep.passed, rep.eps_achieved
    assert rep.low_dim == 4
    # analytic shift stays within the coupling-inflation error of the fit
    rep2 = gd.certify(out, [app1] + apps, tgt, eta=0.1, eps=2.0)
    assert rep2.passed


def test_round_schedule_decreasing():
    ds = gd.round_schedule(1e6, 3)
    assert ds[0] == 1e6 and all(b < a for a, b in zip(ds, ds[1:]))
    with pytest.raises(SimforgeError):
        gd.GadgetPlan(rounds=[[], []], deltas=(1e3, 1e3))


def test_ledger_completeness_and_replay():
    edges = [((0, 1), 1.0), ((2, 3), 0.5)]
    tgt, host = target_and_host(4, edges)
    plan = gd.GadgetPlan(rounds=[[gd.PlannedGadget("subdiv", (0, 1), lam=1.0),
                                  gd.PlannedGadget("subdiv", (2, 3), lam=0.5)]],
                         delta_base=1e4, deltas=(1e4,))
    out, apps, ledger = gd.apply_plan(host, plan)
    consumed = [sig for e in ledger for sig in e.consumed]
    assert len(consumed) == 2
    # every original term consumed exactly once
    for t in host.terms:
        assert sum(1 for sig in consumed if sig[0] == t.sites) == 1
    # replay reproduces the expression exactly
    out2, _, _ = gd.apply_plan(host, plan)
    assert len(out.terms) == len(out2.terms)
    for a, b in zip(out.terms, out2.terms):
        assert a.sites == b.sites and a.coeff == b.coeff and np.array_equal(a.op, b.op)


# ---------------------------------------------------------------------- scans

def test_error_scan_slope_window():
    tgt, _ = target_and_host(2, [((0, 1), 1.0)])

    def builder(delta):
        _, host = target_and_host(2, [((0, 1), 1.0)])
        out, app = gd.subdivide(host, (0, 1), 1.0, "+", delta)
        return out, [app]

    scan = gd.error_scan(tgt, builder, [1e2, 1e3, 1e4, 1e5])
    assert all(b < a for a, b in zip(scan.eps_achieved, scan.eps_achieved[1:]))
    assert -0.75 <= scan.slope <= -0.35
    assert scan.eps_achieved[-1] <= 0.05


def test_error_scan_exact_builder():
    tgt, _ = target_and_host(2, [((0, 1), 1.0)])

    def builder(delta):
        _, host = target_and_host(2, [((0, 1), 1.0)])
        return host, []

    scan = gd.error_scan(tgt, builder, [1e2, 1e3, 1e4])
    assert scan.exact


def test_error_scan_validation():
    tgt, _ = target_and_host(2, [((0, 1), 1.0)])
    with pytest.raises(SimforgeError):
        gd.error_scan(tgt, lambda d: (tgt, []), [1e2, 1e3])
    with pytest.raises(SimforgeError):
        gd.error_scan(tgt, lambda d: (tgt, []), [1e2, 2e2, 1e5])
