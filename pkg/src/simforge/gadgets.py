"""Mediator-pair perturbative gadgets for Heisenberg and XY interactions.

Each gadget introduces one fresh mediator pair (a, b) carrying a heavy
antiferromagnetic term Delta*h_ab whose ground state is the two-qubit
singlet, plus light coupling legs of strength ~ sqrt(Delta).  At second
order the singlet sector acquires the advertised effective interaction; the
constant energy offset (heavy ground energy plus the leg self-energies) is
known in closed form and carried on each application so certification can
subtract it.

Conventions fixed here and validated against dense diagonalization:

* Heisenberg legs carry an extra sqrt(2) so the induced coupling equals the
  requested one (the XY pair gap is half the Heisenberg gap, which the
  family constants absorb).
* The fork realizes +lam*h13 + mu*h23 with legs +lam, +mu on the shared
  mediator and compensation lam*mu*h12; the crossing realizes
  +lam*h14 + mu*h23 with compensation h12 - lam*h24 - mu*h13 + lam*mu*h34.
  With these signs the compensation terms cancel the second-order
  cross-talk exactly.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InterferenceError, SimforgeError
from .operators import FAMILY_MATRIX, HamiltonianExpr, LocalTerm
from .simulation import LocalIsometry, SiteSystem, verify_simulation


@dataclass(frozen=True)
class Family:
    name: str
    leg_scale: float      # multiplies sqrt(Delta) on every light leg
    ground: float         # pair ground energy per unit of heavy coupling
    shift_rate: float     # second-order self-energy per unit leg-coupling^2 / Delta

    @property
    def matrix(self):
        return FAMILY_MATRIX[self.name]


FAMILIES = {
    "heisenberg": Family("heisenberg", math.sqrt(2.0), -3.0, 0.75),
    "xy": Family("xy", 1.0, -2.0, 1.0),
}

SINGLET = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)

_MEDIATOR_RE = re.compile(r"^m(\d+)$")


def fresh_mediators(expr, count=2):
    """Next ids from the reserved mediator namespace m0, m1, ..."""
    top = -1
    for sid in expr.system.ids:
        m = _MEDIATOR_RE.match(str(sid))
        if m:
            top = max(top, int(m.group(1)))
    return tuple(f"m{top + 1 + k}" for k in range(count))


@dataclass
class GadgetApplication:
    """One mediator-pair insertion: terms added, terms removed, and bookkeeping."""

    kind: str                      # subdiv_pos | subdiv_neg | fork | crossing
    family: str
    logical: tuple
    mediators: tuple
    delta: float
    lam: float = 1.0
    mu: float = 0.0
    legs: tuple = ()               # ((site, site), coefficient) light terms
    compensation: tuple = ()       # ((site, site), coefficient) first-order terms
    realizes: tuple = ()           # ((site, site), coefficient) certified interaction
    removed: tuple = ()            # signatures of target terms consumed

    @property
    def energy_shift(self):
        fam = FAMILIES[self.family]
        return fam.ground * self.delta - fam.shift_rate * sum(
            g * g for _, g in self.legs) / self.delta

    def added_terms(self):
        fam = FAMILIES[self.family]
        h = fam.matrix
        a, b = self.mediators
        out = [LocalTerm((a, b), h, self.delta)]
        for sites, g in self.legs:
            out.append(LocalTerm(tuple(sites), h, g))
        for sites, cc in self.compensation:
            out.append(LocalTerm(tuple(sites), h, cc))
        return out


def _term_signature(t):
    return (t.sites, t.op.shape[0], round(t.coeff, 12))


def _consume(expr, sites, coeff, family):
    """Drop one matching family term (if present) and return remaining terms."""
    h = FAMILY_MATRIX[family]
    remaining = []
    removed = []
    for t in expr.terms:
        if (not removed and set(t.sites) == set(sites) and t.op.shape == h.shape
                and abs(t.coeff - coeff) <= 1e-12):
            same = np.allclose(t.op, h, atol=1e-12)
            swapped = len(sites) == 2 and np.allclose(t.op, h, atol=1e-12)
            if same or swapped:   # h is swap-symmetric for both families
                removed.append(t)
                continue
        remaining.append(t)
    return remaining, removed


def _extend(expr, mediators, near=None, placement=None):
    """Append mediator sites; place them on the segment between the ``near``
    sites (subdivision thirds by default) when those carry coordinates."""
    coords = None
    if placement:
        coords = dict(placement)
    elif near is not None and all(s in expr.system.coords for s in near):
        pts = np.array([expr.system.coords[s] for s in near], dtype=float)
        if len(pts) == 2:
            a, b = pts
            spots = [a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0]
        else:
            base = pts.mean(axis=0)
            spots = [base + 1e-3 * (k + 1) for k in range(len(mediators))]
        coords = {m: tuple(s) for m, s in zip(mediators, spots)}
    return expr.system.extended([(m, 2) for m in mediators], coords=coords)


def _check_mediators(expr, mediators):
    for m in mediators:
        if m in set(expr.system.ids):
            raise SimforgeError(f"mediator id {m!r} already present in the system")


def subdivide(expr, edge, lam, sign, delta, *, family="heisenberg", mediators=None,
              symmetric=False, mediator_coords=None):
    """Split one edge through a fresh mediator pair.

    ``sign='+'`` realizes lam*h_edge via legs (1, a) and (2, b);
    ``sign='-'`` realizes -lam*h_edge with both legs on mediator a.
    A matching target term of coefficient lam (or -lam for ``'-'``) is
    consumed from the expression when present.  ``symmetric=True`` balances
    the two leg coefficients (used for chains with large couplings).
    """
    if lam == 0:
        raise SimforgeError("subdivision with lam = 0 is degenerate")
    if sign not in "+-":
        raise SimforgeError(f"sign must be '+' or '-', got {sign!r}")
    fam = FAMILIES[family]
    s1, s2 = edge
    expr.system.index(s1), expr.system.index(s2)
    mediators = mediators or fresh_mediators(expr)
    _check_mediators(expr, mediators)
    a, b = mediators
    root = fam.leg_scale * math.sqrt(delta)
    if symmetric:
        if lam < 0 and sign == "+":
            raise SimforgeError("symmetric legs need lam > 0; use sign='-'")
        g1 = g2 = fam.leg_scale * math.sqrt(abs(lam) * delta)
    else:
        g1, g2 = root, root * lam
    if sign == "+":
        legs = (((s1, a), g1), ((s2, b), g2))
        realized = (((s1, s2), lam),)
    else:
        legs = (((s1, a), g1), ((s2, a), g2))
        realized = (((s1, s2), -lam),)
    target_coeff = realized[0][1]
    remaining, removed = _consume(expr, (s1, s2), target_coeff, family)
    app = GadgetApplication(
        kind="subdiv_pos" if sign == "+" else "subdiv_neg", family=family,
        logical=(s1, s2), mediators=mediators, delta=float(delta), lam=float(lam),
        legs=legs, realizes=realized,
        removed=tuple(_term_signature(t) for t in removed))
    system = _extend(expr, mediators, near=edge, placement=mediator_coords)
    out = HamiltonianExpr(system, remaining + app.added_terms())
    return out, app


def fork(expr, sites, lam, mu, delta, *, family="heisenberg", mediators=None,
         mediator_coords=None):
    """Merge two interactions sharing site 3: realizes lam*h13 + mu*h23.

    Legs couple sites 1 and 2 to mediator a and site 3 to mediator b; the
    first-order term lam*mu*h12 compensates the induced cross-talk.
    """
    s1, s2, s3 = sites
    for s in sites:
        expr.system.index(s)
    fam = FAMILIES[family]
    mediators = mediators or fresh_mediators(expr)
    _check_mediators(expr, mediators)
    a, b = mediators
    root = fam.leg_scale * math.sqrt(delta)
    legs = (((s3, b), root), ((s1, a), root * lam), ((s2, a), root * mu))
    comp = (((s1, s2), lam * mu),) if lam * mu else ()
    remaining, removed1 = _consume(expr, (s1, s3), lam, family)
    mid = HamiltonianExpr(expr.system, remaining)
    remaining, removed2 = _consume(mid, (s2, s3), mu, family)
    app = GadgetApplication(
        kind="fork", family=family, logical=(s1, s2, s3), mediators=mediators,
        delta=float(delta), lam=float(lam), mu=float(mu), legs=legs,
        compensation=comp,
        realizes=(((s1, s3), lam), ((s2, s3), mu)),
        removed=tuple(_term_signature(t) for t in removed1 + removed2))
    system = _extend(expr, mediators, near=(s3,), placement=mediator_coords)
    out = HamiltonianExpr(system, remaining + app.added_terms())
    return out, app


def crossing(expr, pairs, lam, mu, delta, *, family="heisenberg", mediators=None,
             mediator_coords=None):
    """Crossing interactions: realizes lam*h14 + mu*h23 for pairs (1,4), (2,3).

    Sites 1, 2 couple to mediator a; sites 3, 4 to mediator b.  The
    first-order compensation h12 - lam*h24 - mu*h13 + lam*mu*h34 cancels
    every induced second-order term off the target pairs.
    """
    (s1, s4), (s2, s3) = pairs
    sites = (s1, s2, s3, s4)
    if len(set(sites)) != 4:
        raise SimforgeError("crossing needs four distinct sites")
    for s in sites:
        expr.system.index(s)
    fam = FAMILIES[family]
    mediators = mediators or fresh_mediators(expr)
    _check_mediators(expr, mediators)
    a, b = mediators
    root = fam.leg_scale * math.sqrt(delta)
    legs = (((s1, a), root), ((s2, a), root),
            ((b, s4), root * lam), ((b, s3), root * mu))
    comp = tuple((sites_, c) for sites_, c in
                 (((s1, s2), 1.0), ((s2, s4), -lam), ((s1, s3), -mu), ((s3, s4), lam * mu))
                 if c)
    remaining, removed1 = _consume(expr, (s1, s4), lam, family)
    mid = HamiltonianExpr(expr.system, remaining)
    remaining, removed2 = _consume(mid, (s2, s3), mu, family)
    app = GadgetApplication(
        kind="crossing", family=family, logical=sites, mediators=mediators,
        delta=float(delta), lam=float(lam), mu=float(mu), legs=legs,
        compensation=comp,
        realizes=(((s1, s4), lam), ((s2, s3), mu)),
        removed=tuple(_term_signature(t) for t in removed1 + removed2))
    system = _extend(expr, mediators, near=sites, placement=mediator_coords)
    out = HamiltonianExpr(system, remaining + app.added_terms())
    return out, app


# ----------------------------------------------------------------- plans

@dataclass
class PlannedGadget:
    kind: str                 # subdiv | fork | crossing
    sites: tuple              # edge, (s1, s2, s3), or ((s1, s4), (s2, s3))
    lam: float = 1.0
    mu: float = 0.0
    sign: str = "+"
    symmetric: bool = False
    mediators: tuple = None   # explicit mediator site ids (fresh ones otherwise)
    mediator_coords: dict = None


@dataclass
class GadgetPlan:
    """Rounds of parallel applications, listed outermost (largest Delta) first.

    Construction rewrites the target through the rounds in reverse list
    order, so the innermost round (smallest heavy scale) acts on the
    original terms and each earlier-listed round re-gadgetizes the legs the
    later-listed ones produced.
    """

    rounds: list = field(default_factory=list)   # list[list[PlannedGadget]]
    delta_base: float = 1e4
    deltas: tuple = ()

    def __post_init__(self):
        if not self.deltas:
            self.deltas = round_schedule(self.delta_base, len(self.rounds))
        if len(self.deltas) != len(self.rounds):
            raise SimforgeError("one heavy scale per round required")
        if any(d2 >= d1 for d1, d2 in zip(self.deltas, self.deltas[1:])):
            raise SimforgeError("round heavy scales must be strictly decreasing")

    @property
    def depth(self):
        return len(self.rounds)


def round_schedule(delta_base, nrounds):
    """Strictly decreasing heavy scales: delta_base^((2/3)^(r-1)), rounded to
    a power of ten and nudged down on collision."""
    out = []
    for r in range(nrounds):
        exp = math.log10(delta_base) * (2.0 / 3.0) ** r
        d = 10.0 ** round(exp)
        while out and d >= out[-1]:
            d /= 10.0
        out.append(d)
    return tuple(out)


def _round_interference(apps):
    used_edges = set()
    used_mediators = set()
    for g in apps:
        if g.kind == "subdiv":
            edges = [frozenset(g.sites)]
        elif g.kind == "fork":
            edges = [frozenset((g.sites[0], g.sites[2])), frozenset((g.sites[1], g.sites[2]))]
        else:
            edges = [frozenset(g.sites[0]), frozenset(g.sites[1])]
        for e in edges:
            if e in used_edges:
                raise InterferenceError(f"edge {sorted(map(str, e))} gadgetized twice in one round")
            used_edges.add(e)
    return used_mediators


@dataclass
class LedgerEntry:
    application_id: str
    kind: str
    round_index: int
    delta: float
    consumed: tuple
    produced: tuple          # realized interaction; legs become next targets
    mediators: tuple


def apply_plan(expr, plan, *, family="heisenberg"):
    """Rewrite ``expr`` through every round of ``plan``.

    Rounds are applied innermost-first (reverse list order) so heavy scales
    decrease outward in the list while each application's perturbative
    regime stays valid.  Returns ``(expr, applications, ledger)``; the
    ledger maps every consumed term to the application that absorbed it.
    """
    applications = []
    ledger = []
    current = expr
    for ridx in range(len(plan.rounds) - 1, -1, -1):
        apps = plan.rounds[ridx]
        _round_interference(apps)
        delta = plan.deltas[ridx]
        for k, g in enumerate(apps):
            if g.kind == "subdiv":
                current, app = subdivide(current, g.sites, g.lam, g.sign, delta,
                                         family=family, symmetric=g.symmetric,
                                         mediators=g.mediators,
                                         mediator_coords=g.mediator_coords)
            elif g.kind == "fork":
                current, app = fork(current, g.sites, g.lam, g.mu, delta,
                                    family=family, mediators=g.mediators,
                                    mediator_coords=g.mediator_coords)
            elif g.kind == "crossing":
                current, app = crossing(current, g.sites, g.lam, g.mu, delta,
                                        family=family, mediators=g.mediators,
                                        mediator_coords=g.mediator_coords)
            else:
                raise SimforgeError(f"unknown gadget kind {g.kind!r}")
            applications.append(app)
            ledger.append(LedgerEntry(
                application_id=f"r{ridx + 1}:{k}", kind=app.kind, round_index=ridx + 1,
                delta=delta, consumed=app.removed, produced=app.realizes,
                mediators=app.mediators))
    return current, applications, ledger


def certification_isometry(target_system, sim_expr, applications):
    """Identity factors on the logical sites, singlet fill on every mediator pair."""
    factors = {sid: ((sid,), np.eye(target_system.dim(sid))) for sid in target_system.ids}
    fill_sites = []
    fill = np.ones(1, dtype=complex)
    for app in applications:
        fill_sites.extend(app.mediators)
        fill = np.kron(fill, SINGLET)
    return LocalIsometry(target_system, sim_expr.system, factors, fill_sites, fill)


def certify(sim_expr, applications, target_expr, eta, eps, *, shift="analytic", seed=0):
    """Certify a gadgetized expression against its target.

    The spectral cut sits half the innermost heavy scale above the combined
    mediator ground energy; ``shift`` subtracts either the analytic offset
    of the applications or (``"fit"``) the trace-optimal constant.
    """
    if not applications:
        return verify_simulation(sim_expr, target_expr, delta=_plain_cut(sim_expr),
                                 eta=eta, eps=eps,
                                 isometry=LocalIsometry.identity(target_expr.system),
                                 seed=seed)
    ground = sum(FAMILIES[a.family].ground * a.delta for a in applications)
    cut = ground + min(a.delta for a in applications) / 2.0
    total_shift = sum(a.energy_shift for a in applications) if shift == "analytic" else shift
    iso = certification_isometry(target_expr.system, sim_expr, applications)
    return verify_simulation(sim_expr, target_expr, delta=cut, eta=eta, eps=eps,
                             isometry=iso, shift=total_shift, seed=seed)


def _plain_cut(expr):
    from .operators import assemble, spectral_norm
    return spectral_norm(assemble(expr)) + 1.0


@dataclass
class ScanResult:
    deltas: tuple
    eps_achieved: tuple
    eta_achieved: tuple
    slope: float | None       # None when every point is numerically exact

    @property
    def exact(self):
        return self.slope is None


def error_scan(target_expr, builder, deltas, *, eta=1.0, eps=np.inf, seed=0):
    """Certify ``builder(delta)`` against the target over a heavy-scale sweep.

    ``builder`` returns ``(sim_expr, applications)``.  Needs at least three
    geometrically spaced scales; reports achieved errors and the fitted
    log-log slope (None when the builder is exact to solver precision).
    """
    deltas = tuple(float(d) for d in deltas)
    if len(deltas) < 3:
        raise SimforgeError("scan needs at least 3 heavy scales")
    ratios = [deltas[i + 1] / deltas[i] for i in range(len(deltas) - 1)]
    if max(ratios) / min(ratios) > 1.5:
        raise SimforgeError("scan scales must be geometrically spaced")
    es, hs = [], []
    for d in deltas:
        sim_expr, apps = builder(d)
        rep = certify(sim_expr, apps, target_expr, eta=eta, eps=eps, seed=seed)
        es.append(rep.eps_achieved)
        hs.append(rep.eta_achieved)
    if max(es) <= 1e-12:
        slope = None
    else:
        slope = float(np.polyfit(np.log10(deltas), np.log10(np.maximum(es, 1e-16)), 1)[0])
    return ScanResult(deltas, tuple(es), tuple(hs), slope)
