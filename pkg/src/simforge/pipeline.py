"""End-to-end compilation of a geometrically local target onto the edges of
a translationally-invariant host graph.

Stages: degree reduction (when needed) -> grid snapping -> disjoint-path
routing (crossing gadgets in 2D) -> fundamental-domain extraction of the
host -> placement of grid vertices on central vertices of domain translates
-> subdivision chains along the in-host paths.  Every stage error carries
its stage tag; micro instances get a certification report attached.

The returned plan's depth is derived from the locality parameters and the
host geometry alone (path-length bounds, not the instance), which is what
makes the round count independent of the target size.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gadgets as gd
from . import geometry as geo
from .errors import DomainError, RoutingError, SimforgeError
from .operators import DENSE_CUTOVER, FAMILY_MATRIX, HamiltonianExpr, LocalTerm, SiteSystem


class StageError(SimforgeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def interaction_graph(expr):
    """Embedded graph of a 2-local expression (site coords required)."""
    if expr.max_locality() > 2:
        raise SimforgeError("interaction graph needs a 2-local expression")
    coords = {}
    for sid in expr.system.ids:
        if sid not in expr.system.coords:
            raise SimforgeError(f"site {sid!r} carries no coordinates")
        coords[sid] = expr.system.coords[sid]
    D = len(next(iter(coords.values())))
    edges = [tuple(t.sites) for t in expr.terms if len(t.sites) == 2]
    return geo.EmbeddedGraph(D, coords, edges)


def edge_couplings(expr, family):
    """coupling per 2-site edge, merging parallel family terms."""
    h = FAMILY_MATRIX[family]
    out = {}
    for t in expr.terms:
        if len(t.sites) != 2:
            continue
        if t.op.shape != h.shape or not np.allclose(t.op, h, atol=1e-12):
            raise SimforgeError(f"term on {t.sites!r} is not a {family} interaction")
        key = frozenset(t.sites)
        out[key] = out.get(key, 0.0) + t.coeff
    return out


# ----------------------------------------------------------- degree reduction

def reduce_degree(expr, *, max_deg=3, delta_base=1e4, family="heisenberg"):
    """Subdivide every edge, then fork-merge edge pairs at high-degree
    vertices until every degree is at most ``max_deg``.

    Returns ``(plan, reduced_expr)``; the plan's rounds are the fork levels
    (outermost first) followed by the subdivision round, and its depth is at
    most ceil(log2 d_max) + 1.  Each fork consumes the exact leg couplings
    the round inside it produces, so the coefficients are planned with the
    same closed forms the application phase uses.
    """
    G = interaction_graph(expr)
    couplings = edge_couplings(expr, family)
    if not couplings:
        return gd.GadgetPlan(rounds=[], delta_base=delta_base, deltas=()), expr
    d_max = max(G.degree(v) for v in G.vertices)
    n_fork_levels = 0
    deg = d_max
    while deg > max_deg:
        deg = (deg + 1) // 2
        n_fork_levels += 1
    nrounds = 1 + n_fork_levels
    deltas = gd.round_schedule(delta_base, nrounds)
    fam = gd.FAMILIES[family]

    counter = itertools.count()
    sub_round = []
    pending = {v: [] for v in G.vertices}     # vertex -> [(mediator, coupling)]
    root_sub = fam.leg_scale * math.sqrt(deltas[-1])
    for e, K in sorted(couplings.items(), key=lambda kv: sorted(map(str, kv[0]))):
        u, v = sorted(e, key=str)
        a, b = f"m{next(counter)}", f"m{next(counter)}"
        sub_round.append(gd.PlannedGadget("subdiv", (u, v), lam=K, mediators=(a, b)))
        pending[u].append((a, root_sub))
        pending[v].append((b, root_sub * K))

    fork_rounds = []
    for level in range(n_fork_levels):
        delta_f = deltas[-2 - level]
        root_f = fam.leg_scale * math.sqrt(delta_f)
        this_round = []
        for v in sorted(pending, key=str):
            ms = pending[v]
            if len(ms) <= max_deg:
                continue
            merged = []
            it = iter(ms)
            for x1 in it:
                x2 = next(it, None)
                if x2 is None:
                    merged.append(x1)
                    break
                c, d = f"m{next(counter)}", f"m{next(counter)}"
                this_round.append(gd.PlannedGadget(
                    "fork", (x1[0], x2[0], v), lam=x1[1], mu=x2[1], mediators=(c, d)))
                merged.append((d, root_f))
            pending[v] = merged
        fork_rounds.insert(0, this_round)
    rounds = fork_rounds + [sub_round]
    plan = gd.GadgetPlan(rounds=rounds, delta_base=delta_base, deltas=deltas)
    reduced, apps, ledger = gd.apply_plan(expr, plan, family=family)
    out_graph = interaction_graph(two_local_view(reduced))
    worst = max((out_graph.degree(v) for v in out_graph.vertices), default=0)
    if worst > max_deg:
        raise SimforgeError(f"degree reduction left a vertex of degree {worst}")
    return plan, reduced


def two_local_view(expr):
    return HamiltonianExpr(expr.system, [t for t in expr.terms if len(t.sites) <= 2])


# ------------------------------------------------------------ chain planning

def chain_rounds_needed(length):
    """Nested subdivision rounds required to realize one edge along a path."""
    if length <= 1:
        return 0
    if length <= 3:
        return 1
    best = None
    for m in range(1, length - 1):
        l1, l2 = m, length - m - 1
        cand = 1 + max(chain_rounds_needed(l1), chain_rounds_needed(l2))
        best = cand if best is None else min(best, cand)
    return best


def _best_split(length):
    best = (None, None)
    for m in range(1, length - 1):
        l1, l2 = m, length - m - 1
        depth = 1 + max(chain_rounds_needed(l1), chain_rounds_needed(l2))
        if best[0] is None or depth < best[0]:
            best = (depth, m)
    return best[1]


@dataclass
class ChainRecord:
    edge: tuple
    coupling: float
    path: tuple
    rounds_used: int
    pendants: tuple = ()


class _ChainBuilder:
    """Plans nested subdivision chains along host paths.

    An edge's own split sits at its chain-depth round; the legs the split
    will create are planned one round out (larger heavy scale) with the
    exact coefficients the application phase produces, so the outer rounds
    find and consume them.
    """

    def __init__(self, G, used, deltas, family):
        self.G = G
        self.used = set(used)
        self.deltas = deltas
        self.family = family
        self.rounds = {}
        self.pendants = []

    def pendant_for(self, anchor):
        for w in sorted(self.G.neighbors(anchor), key=str):
            if w not in self.used:
                self.used.add(w)
                self.pendants.append(w)
                return w
        raise RoutingError(f"no free pendant vertex next to {anchor!r}")

    def add(self, round_idx, planned):
        self.rounds.setdefault(round_idx, []).append(planned)

    def emit(self, edge, coupling, path, round_idx):
        x, y = edge
        length = len(path) - 1
        if length < 1 or path[0] != x or path[-1] != y:
            raise SimforgeError("chain path endpoints mismatch")
        if length == 1:
            return
        if round_idx < 1:
            raise SimforgeError("chain recursion exceeded its allocated rounds")
        if length == 2:
            a = path[1]
            b = self.pendant_for(a)
            lam = -coupling
            self.add(round_idx, gd.PlannedGadget(
                "subdiv", (x, y), lam=lam, sign="-", symmetric=lam > 0,
                mediators=(a, b),
                mediator_coords={b: tuple(self.G.coords[b])}))
            return
        if length == 3:
            a, b = path[1], path[2]
            self.add(round_idx, gd.PlannedGadget(
                "subdiv", (x, y), lam=coupling, sign="+", symmetric=coupling > 0,
                mediators=(a, b)))
            return
        m = _best_split(length)
        a, b = path[m], path[m + 1]
        self.add(round_idx, gd.PlannedGadget(
            "subdiv", (x, y), lam=coupling, sign="+", symmetric=coupling > 0,
            mediators=(a, b)))
        fam = gd.FAMILIES[self.family]
        delta = self.deltas[round_idx - 1]
        if coupling > 0:
            g1 = g2 = fam.leg_scale * math.sqrt(abs(coupling) * delta)
        else:
            g1 = fam.leg_scale * math.sqrt(delta)
            g2 = g1 * coupling
        self.emit((x, a), g1, tuple(path[:m + 1]), round_idx - 1)
        self.emit((b, y), g2, tuple(path[m + 1:]), round_idx - 1)


# -------------------------------------------------------------- compilation

@dataclass
class CompileResult:
    plan: gd.GadgetPlan
    expr: HamiltonianExpr
    route: geo.RoutePlan
    domain: geo.FundamentalDomain
    placements: dict
    chains: list
    applications: list
    ledger: list = None
    report: object = None

    @property
    def depth(self):
        return self.plan.depth


def _grid_key(p):
    return tuple(int(x) for x in p)


def compile_target(target, host, params, *, family="heisenberg", delta_base=1e4,
                   spacing=None, eta=0.1, eps=0.1, certify_micro=True, window=4):
    """Compile ``target`` onto the edges of the host graph.

    Returns a :class:`CompileResult`; when the compiled expression is small
    enough for dense verification and ``certify_micro`` is set, the
    certification report against the placed target is attached.
    """
    # ---- stage: validation
    try:
        tgraph = interaction_graph(target)
        couplings = edge_couplings(target, family)
    except SimforgeError as exc:
        raise StageError("validate", str(exc)) from None
    loc = geo.check_locality(tgraph, params)
    if not loc.passed:
        raise StageError("validate", f"target is not geometrically local: "
                                     f"{loc.ball_violations or loc.edge_violations}")
    if not target.terms:
        dom = geo.extract_domain(host, window=window)
        empty_plan = gd.GadgetPlan(rounds=[], delta_base=delta_base, deltas=())
        sysm = SiteSystem([])
        return CompileResult(empty_plan, HamiltonianExpr(sysm), geo.RoutePlan({}, {}, []),
                             dom, {}, [], [], [])

    # ---- stage: degree
    worst = max(tgraph.degree(v) for v in tgraph.vertices)
    if worst > 3:
        raise StageError("degree", "compile currently expects a degree-<=3 target; "
                                   "run reduce_degree first")

    # ---- stage: snap
    min_edge = min(float(np.linalg.norm(tgraph.coords[a] - tgraph.coords[b]))
                   for a, b in (tuple(e) for e in tgraph.edges))
    a_spacing = spacing if spacing is not None else min_edge / 3.0
    try:
        snap = geo.snap_to_grid(tgraph, a_spacing)
    except SimforgeError as exc:
        raise StageError("snap", str(exc)) from None

    # ---- stage: route
    try:
        route = geo.route_paths(snap.assignment, [tuple(e) for e in tgraph.edges],
                                allow_crossings=tgraph.D == 2)
    except RoutingError as exc:
        raise StageError("route", str(exc)) from None
    if route.crossings:
        raise StageError("route", "declared crossings need the crossing gadget; "
                                  "desk-scale compile expects planar routings")

    # ---- stage: domain
    try:
        domain = geo.extract_domain(host, window=window)
    except DomainError as exc:
        raise StageError("domain", str(exc)) from None

    # ---- stage: place (grid vertices -> host vertices)
    used_cells = set()
    for p in snap.assignment.values():
        used_cells.add(_grid_key(p))
    for path in route.paths.values():
        used_cells.update(_grid_key(q) for q in path)
    offset = _fit_window(domain, used_cells)
    cellmap = {k: domain.translate_cell(tuple(np.add(k, offset))) for k in used_cells}

    directions = {k: set() for k in used_cells}
    for e, path in route.paths.items():
        for q1, q2 in zip(path, path[1:]):
            d = tuple(np.subtract(q2, q1))
            directions[_grid_key(q1)].add(d)
            directions[_grid_key(q2)].add(tuple(-x for x in d))

    placements = {}
    centers = {}
    port_paths = {}
    for k in used_cells:
        ports = []
        for d in sorted(directions[k]):
            ports.append(_inside_port(domain, offset, k, d))
        cell = cellmap[k]
        if ports:
            y, paths = geo.central_vertex(host, cell, _unique(ports))
        else:
            y, paths = sorted(cell, key=str)[0], []
        centers[k] = y
        port_paths[k] = {p[-1]: p for p in paths}
    for v, p in snap.assignment.items():
        placements[v] = centers[_grid_key(p)]

    # ---- stage: chains
    g_paths = {}
    used_host = set(centers.values())
    for e, gpath in route.paths.items():
        hostpath = _host_path(domain, host, offset, gpath, centers, port_paths)
        g_paths[e] = hostpath
        used_host.update(hostpath)
    bound = _length_bound(domain, params, snap.spacing)
    depth = max(1, chain_rounds_needed(bound))
    deltas = gd.round_schedule(delta_base, depth)
    builder = _ChainBuilder(host, used_host, deltas, family)
    chain_records = []
    for e in sorted(route.paths, key=lambda e: sorted(map(str, e))):
        u, v = sorted(e, key=str)
        path = g_paths[e]
        if path[0] != placements[u]:
            u, v = v, u
        K = couplings[frozenset((u, v))]
        r = chain_rounds_needed(len(path) - 1)
        if r > depth:
            raise StageError("chain", f"path for {u!r}-{v!r} needs {r} rounds "
                                      f"above the allocated depth {depth}")
        npend = len(builder.pendants)
        builder.emit((placements[u], placements[v]), K, tuple(path), r)
        chain_records.append(ChainRecord((u, v), K, tuple(path), r,
                                         tuple(builder.pendants[npend:])))

    rounds = [builder.rounds.get(r, []) for r in range(1, depth + 1)]
    plan = gd.GadgetPlan(rounds=rounds, delta_base=delta_base, deltas=deltas)

    # the placed target: original couplings on the center vertices
    psys = SiteSystem([(placements[v], 2) for v in sorted(snap.assignment, key=str)],
                      coords={placements[v]: tuple(host.coords[placements[v]])
                              for v in snap.assignment})
    pterms = []
    h = FAMILY_MATRIX[family]
    for e, K in couplings.items():
        u, v = sorted(e, key=str)
        pterms.append(LocalTerm((placements[u], placements[v]), h, K))
    placed = HamiltonianExpr(psys, pterms)

    expr, applications, ledger = gd.apply_plan(placed, plan, family=family)
    _assert_on_host(expr, host)

    report = None
    if certify_micro and expr.system.total_dim <= DENSE_CUTOVER:
        report = gd.certify(expr, applications, placed, eta=eta, eps=eps)
    result = CompileResult(plan, expr, route, domain, placements,
                           chain_records, applications, ledger, report)
    return result


def _unique(seq):
    out = []
    for x in seq:
        if x not in out:
            out.append(x)
    return out


def _fit_window(domain, used_cells):
    """Offset shifting the used grid cells into the patch's valid range."""
    D = len(domain.basis)
    used = np.array(sorted(used_cells))
    span = max(domain.window, int((used.max(0) - used.min(0)).max()) + 2)
    valid = []
    for k in itertools.product(range(-span, span + 1), repeat=D):
        if domain.translate_cell(k) is not None:
            valid.append(k)
    if not valid:
        raise StageError("place", "no valid domain translates on the patch")
    valid = np.array(valid)
    vmin, vmax = valid.min(axis=0), valid.max(axis=0)
    umin, umax = used.min(axis=0), used.max(axis=0)
    if np.any(umax - umin > vmax - vmin):
        need = (umax - umin).max() + 1
        raise StageError("place", f"host patch window too small; need about "
                                  f"{need} cells per direction")
    offset = vmin - umin
    for k in used_cells:
        if domain.translate_cell(tuple(np.add(k, offset))) is None:
            raise StageError("place", "host patch cannot host the routed region; "
                                      "enlarge the patch")
    return tuple(int(x) for x in offset)


def _inside_port(domain, offset, k, d):
    """Host vertex of cell k carrying the inter-cell edge in direction d.

    Both directions reference the same physical port edge: the +axis port
    (u0, v0) has u0 in T and v0 in T + w_axis, so the -axis port of a cell
    is v0 translated from the previous cell.
    """
    axis = int(np.flatnonzero(d)[0])
    sign = int(np.sign(d[axis]))
    kk = tuple(np.add(k, offset))
    port = domain.ports.get((axis, 1))
    if port is None:
        raise StageError("place", f"domain has no port along axis {axis}")
    u0, v0 = port
    if sign > 0:
        return _translate_vertex(domain, u0, kk)
    prev = tuple(kk[m] - (1 if m == axis else 0) for m in range(len(kk)))
    return _translate_vertex(domain, v0, prev)


def _translate_vertex(domain, v, k):
    shift = sum(ki * wi for ki, wi in zip(k, domain.basis))
    out = domain.graph.vertex_at(domain.graph.coords[v] + shift)
    if out is None:
        raise StageError("place", f"translate of {v!r} by {k} leaves the patch")
    return out


def _host_path(domain, host, offset, gpath, centers, port_paths):
    """In-host path realizing one routed grid path."""
    cells = [_grid_key(q) for q in gpath]
    out = [centers[cells[0]]]
    for a, b in zip(cells, cells[1:]):
        d = tuple(np.subtract(b, a))
        pa = _inside_port(domain, offset, a, d)
        pb = _inside_port(domain, offset, b, tuple(-x for x in d))
        out += _cell_segment(domain, host, offset, a, out[-1], pa, centers, port_paths)
        out.append(pb)
    final = centers[cells[-1]]
    out += _cell_segment(domain, host, offset, cells[-1], out[-1], final,
                         centers, port_paths)
    seen = set()
    for v in out:
        if v in seen:
            raise StageError("chain", f"host path revisits {v!r}")
        seen.add(v)
    for u, v in zip(out, out[1:]):
        if not host.has_edge(u, v):
            raise StageError("chain", f"host path uses a non-edge {u!r}-{v!r}")
    return out


def _cell_segment(domain, host, offset, k, frm, to, centers, port_paths):
    """Path (exclusive of ``frm``, inclusive of ``to``) inside one cell.

    Terminal cells reuse the internally disjoint center-to-port paths so
    several chains meeting at a logical site share only that site."""
    if frm == to:
        return []
    if frm == centers.get(k) and to in port_paths.get(k, {}):
        return list(port_paths[k][to][1:])
    if to == centers.get(k) and frm in port_paths.get(k, {}):
        return list(port_paths[k][frm][::-1][1:])
    cell = set(domain.translate_cell(tuple(np.add(k, offset))))
    path = geo._subgraph_path(host, cell, [frm], [to])
    if path is None:
        raise StageError("chain", f"cell {k} disconnected between {frm!r} and {to!r}")
    return path[1:]


def _length_bound(domain, params, spacing):
    """Instance-independent bound on realized path lengths: grid detour
    budget times the in-cell stretch of the host."""
    stretch = 2 * (domain.size - 1) + 1
    grid_bound = max(3, int(math.ceil(4.0 * params.C / spacing)))
    return stretch * grid_bound


def _assert_on_host(expr, host):
    for t in expr.terms:
        if len(t.sites) == 2:
            a, b = t.sites
            if not host.has_edge(a, b):
                raise StageError("emit", f"term on {t.sites!r} is not a host edge")
