"""Structured-text documents for Hamiltonians, graphs, plans, tilesets,
gate sequences, and certification reports.

Formats are line-based: whitespace-separated tokens, ``#`` starts a
comment, every document closes with ``end``.  Emission is deterministic
(17-significant-digit floats, fixed field order), so identical inputs give
byte-identical documents; every emitted document re-parses to an equal
in-memory value.

Frozen conventions recorded here:
  * Hamiltonian site order in the document is the tensor-embedding order.
  * Tile grids print top row first; cell (i, j) of the API means column i,
    height j from the bottom.
  * Matrix entries are row-major ``re im`` pairs.
"""

from fractions import Fraction

import numpy as np

from . import clock as ck
from . import gadgets as gd
from . import geometry as geo
from . import tiles as tl
from .errors import FormatError
from .operators import HamiltonianExpr, LocalTerm, SiteSystem, named_interaction


def _fmt(x):
    return f"{float(x):.17g}"


def _lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


class _Reader:
    def __init__(self, text):
        self.rows = list(_lines(text))
        self.pos = 0

    def peek(self):
        return self.rows[self.pos] if self.pos < len(self.rows) else (None, None)

    def next(self, what="line"):
        if self.pos >= len(self.rows):
            raise FormatError(f"unexpected end of document while reading {what}")
        row = self.rows[self.pos]
        self.pos += 1
        return row

    def expect_end(self):
        lineno, tok = self.next("end")
        if tok != ["end"]:
            raise FormatError(f"line {lineno}: expected 'end'")


def _matrix_lines(M):
    out = []
    for row in np.asarray(M, dtype=complex):
        out.append("  " + " ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row))
    return out


def _read_matrix(reader, dim):
    M = np.zeros((dim, dim), dtype=complex)
    for r in range(dim):
        lineno, tok = reader.next("matrix row")
        if len(tok) != 2 * dim:
            raise FormatError(f"line {lineno}: expected {2 * dim} numbers")
        vals = [float(t) for t in tok]
        M[r] = [complex(vals[2 * k], vals[2 * k + 1]) for k in range(dim)]
    return M


# -------------------------------------------------------------- hamiltonians

NAMED_KINDS = ("heisenberg", "xy")


def emit_hamiltonian(expr):
    out = ["hamiltonian"]
    for sid, d in zip(expr.system.ids, expr.system.dims):
        row = f"site {sid} dim {d}"
        if sid in expr.system.coords:
            row += " coord " + " ".join(_fmt(x) for x in expr.system.coords[sid])
        out.append(row)
    for t in expr.terms:
        named = None
        for kind in NAMED_KINDS:
            ref = named_interaction(kind)
            if t.op.shape == ref.shape and np.array_equal(t.op, ref):
                named = kind
                break
        head = "term sites " + " ".join(str(s) for s in t.sites)
        if named:
            out.append(f"{head} kind {named} coeff {_fmt(t.coeff)}")
        else:
            out.append(f"{head} matrix {t.op.shape[0]} coeff {_fmt(t.coeff)}")
            out += _matrix_lines(t.op)
    out.append("end")
    return "\n".join(out) + "\n"


def parse_hamiltonian(text):
    reader = _Reader(text)
    lineno, tok = reader.next("header")
    if tok != ["hamiltonian"]:
        raise FormatError(f"line {lineno}: expected 'hamiltonian'")
    sites = []
    coords = {}
    terms = []
    while True:
        lineno, tok = reader.peek()
        if tok is None:
            raise FormatError("missing 'end'")
        if tok == ["end"]:
            reader.next()
            break
        reader.next()
        if tok[0] == "site":
            try:
                sid = tok[1]
                if tok[2] != "dim":
                    raise ValueError
                dim = int(tok[3])
            except (IndexError, ValueError):
                raise FormatError(f"line {lineno}: malformed site row") from None
            sites.append((sid, dim))
            if len(tok) > 4:
                if tok[4] != "coord":
                    raise FormatError(f"line {lineno}: expected 'coord'")
                coords[sid] = tuple(float(x) for x in tok[5:])
        elif tok[0] == "term":
            if tok[1] != "sites":
                raise FormatError(f"line {lineno}: expected 'sites'")
            try:
                kind_at = tok.index("kind")
            except ValueError:
                kind_at = None
            try:
                mat_at = tok.index("matrix")
            except ValueError:
                mat_at = None
            if kind_at is not None:
                support = tuple(tok[2:kind_at])
                kind = tok[kind_at + 1]
                coeff = float(tok[kind_at + 3])
                op = named_interaction(kind)
            elif mat_at is not None:
                support = tuple(tok[2:mat_at])
                dim = int(tok[mat_at + 1])
                coeff = float(tok[mat_at + 3])
                op = _read_matrix(reader, dim)
            else:
                raise FormatError(f"line {lineno}: term needs 'kind' or 'matrix'")
            terms.append((support, op, coeff))
        else:
            raise FormatError(f"line {lineno}: unknown row {tok[0]!r}")
    system = SiteSystem(sites, coords=coords)
    return HamiltonianExpr(system, [LocalTerm(s, op, c) for s, op, c in terms])


# -------------------------------------------------------------------- graphs

def emit_graph(G):
    out = [f"graph dim {G.D}"]
    for v in sorted(G.vertices, key=str):
        out.append(f"vertex {v} coord " + " ".join(_fmt(x) for x in G.coords[v]))
    for e in sorted(G.edges, key=lambda e: sorted(map(str, e))):
        a, b = sorted(e, key=str)
        out.append(f"edge {a} {b}")
    if G.basis:
        for b in G.basis:
            out.append("basis " + " ".join(_fmt(x) for x in b))
    out.append("end")
    return "\n".join(out) + "\n"


def parse_graph(text):
    reader = _Reader(text)
    lineno, tok = reader.next("header")
    if len(tok) != 3 or tok[0] != "graph" or tok[1] != "dim":
        raise FormatError(f"line {lineno}: expected 'graph dim D'")
    D = int(tok[2])
    coords = {}
    edges = []
    basis = []
    while True:
        lineno, tok = reader.peek()
        if tok is None:
            raise FormatError("missing 'end'")
        reader.next()
        if tok == ["end"]:
            break
        if tok[0] == "vertex":
            if tok[2] != "coord" or len(tok) != 3 + D:
                raise FormatError(f"line {lineno}: malformed vertex row")
            coords[tok[1]] = tuple(float(x) for x in tok[3:])
        elif tok[0] == "edge":
            edges.append((tok[1], tok[2]))
        elif tok[0] == "basis":
            basis.append(tuple(float(x) for x in tok[1:]))
        else:
            raise FormatError(f"line {lineno}: unknown row {tok[0]!r}")
    return geo.EmbeddedGraph(D, coords, edges, basis=basis or None)


# --------------------------------------------------------------------- plans

def emit_plan(plan):
    out = [f"plan rounds {plan.depth} delta-base {_fmt(plan.delta_base)}"]
    for r, (apps, delta) in enumerate(zip(plan.rounds, plan.deltas), start=1):
        out.append(f"round {r} delta {_fmt(delta)}")
        for g in apps:
            if g.kind == "crossing":
                sites = " ".join(str(s) for pair in g.sites for s in pair)
            else:
                sites = " ".join(str(s) for s in g.sites)
            row = (f"  {g.kind} sites {sites} lam {_fmt(g.lam)} mu {_fmt(g.mu)} "
                   f"sign {g.sign} symmetric {int(g.symmetric)}")
            if g.mediators:
                row += " mediators " + " ".join(str(m) for m in g.mediators)
            out.append(row)
    out.append("end")
    return "\n".join(out) + "\n"


def parse_plan(text):
    reader = _Reader(text)
    lineno, tok = reader.next("header")
    if tok[:2] != ["plan", "rounds"] or tok[3] != "delta-base":
        raise FormatError(f"line {lineno}: expected plan header")
    nrounds = int(tok[2])
    delta_base = float(tok[4])
    rounds = []
    deltas = []
    current = None
    while True:
        lineno, tok = reader.peek()
        if tok is None:
            raise FormatError("missing 'end'")
        reader.next()
        if tok == ["end"]:
            break
        if tok[0] == "round":
            if tok[2] != "delta":
                raise FormatError(f"line {lineno}: malformed round row")
            deltas.append(float(tok[3]))
            current = []
            rounds.append(current)
        elif tok[0] in ("subdiv", "fork", "crossing"):
            if current is None:
                raise FormatError(f"line {lineno}: application before any round")
            fields = {}
            k = 1
            if tok[k] != "sites":
                raise FormatError(f"line {lineno}: expected 'sites'")
            k += 1
            sites = []
            while k < len(tok) and tok[k] not in ("lam", "mu", "sign", "symmetric",
                                                  "mediators"):
                sites.append(tok[k])
                k += 1
            while k < len(tok):
                key = tok[k]
                if key == "mediators":
                    fields[key] = tuple(tok[k + 1:])
                    break
                fields[key] = tok[k + 1]
                k += 2
            if tok[0] == "crossing":
                if len(sites) != 4:
                    raise FormatError(f"line {lineno}: crossing needs 4 sites")
                sites = ((sites[0], sites[1]), (sites[2], sites[3]))
            else:
                sites = tuple(sites)
            current.append(gd.PlannedGadget(
                tok[0], sites, lam=float(fields.get("lam", 1.0)),
                mu=float(fields.get("mu", 0.0)), sign=fields.get("sign", "+"),
                symmetric=bool(int(fields.get("symmetric", 0))),
                mediators=fields.get("mediators")))
        else:
            raise FormatError(f"line {lineno}: unknown row {tok[0]!r}")
    if len(rounds) != nrounds:
        raise FormatError(f"plan declares {nrounds} rounds, found {len(rounds)}")
    return gd.GadgetPlan(rounds=rounds, delta_base=delta_base, deltas=tuple(deltas))


# ------------------------------------------------------------------ tilesets

def emit_tileset(ts):
    out = ["tileset"]
    for t in ts.tiles:
        row = (f"tile {t.label} top {t.top} right {t.right} bottom {t.bottom} "
               f"left {t.left}")
        if t.weight:
            row += f" weight {Fraction(t.weight)}"
        out.append(row)
    for side in ("top", "bottom", "left", "right"):
        allowed = ts.boundary.get(side)
        if allowed is not None:
            out.append(f"boundary {side} " + " ".join(sorted(allowed)))
    out.append("end")
    return "\n".join(out) + "\n"


def parse_tileset(text):
    reader = _Reader(text)
    lineno, tok = reader.next("header")
    if tok != ["tileset"]:
        raise FormatError(f"line {lineno}: expected 'tileset'")
    tiles = []
    boundary = {}
    while True:
        lineno, tok = reader.peek()
        if tok is None:
            raise FormatError("missing 'end'")
        reader.next()
        if tok == ["end"]:
            break
        if tok[0] == "tile":
            fields = dict(zip(tok[2::2], tok[3::2]))
            try:
                tiles.append(tl.Tile(tok[1], top=fields["top"], right=fields["right"],
                                     bottom=fields["bottom"], left=fields["left"],
                                     weight=Fraction(fields.get("weight", 0))))
            except KeyError as missing:
                raise FormatError(f"line {lineno}: tile missing {missing}") from None
        elif tok[0] == "boundary":
            boundary[tok[1]] = set(tok[2:])
        else:
            raise FormatError(f"line {lineno}: unknown row {tok[0]!r}")
    return tl.Tileset(tiles, boundary=boundary or None)


def emit_tile_config(cfg):
    head = f"tiling width {cfg.W} height {cfg.H}"
    return head + "\n" + cfg.dump() + "\n"


# ------------------------------------------------------------ gate sequences

def emit_gates(seq):
    out = ["gates register " + " ".join(str(d) for d in seq.register)]
    for g in seq.steps:
        if g.name in ck.SYNTH_GATES and len(g.cells) == 1:
            out.append(f"step {g.name} cells {g.cells[0]}")
        elif not g.cells:
            out.append("step wait")
        else:
            cells = " ".join(str(c) for c in g.cells)
            out.append(f"step {g.name} cells {cells} matrix {g.matrix.shape[0]}")
            out += _matrix_lines(g.matrix)
    out.append("end")
    return "\n".join(out) + "\n"


def parse_gates(text):
    reader = _Reader(text)
    lineno, tok = reader.next("header")
    if tok[:2] != ["gates", "register"]:
        raise FormatError(f"line {lineno}: expected gates header")
    register = tuple(int(x) for x in tok[2:])
    steps = []
    while True:
        lineno, tok = reader.peek()
        if tok is None:
            raise FormatError("missing 'end'")
        reader.next()
        if tok == ["end"]:
            break
        if tok[0] != "step":
            raise FormatError(f"line {lineno}: unknown row {tok[0]!r}")
        if tok[1] == "wait":
            steps.append(ck.WAIT)
            continue
        name = tok[1]
        if "matrix" in tok:
            mat_at = tok.index("matrix")
            cells = tuple(int(c) for c in tok[3:mat_at])
            dim = int(tok[mat_at + 1])
            M = _read_matrix(reader, dim)
            steps.append(ck.Gate(name, cells, M))
        else:
            cells = tuple(int(c) for c in tok[3:])
            if name not in ck.SYNTH_GATES:
                raise FormatError(f"line {lineno}: unknown named gate {name!r}")
            steps.append(ck.Gate(name, cells, ck.SYNTH_GATES[name]))
    return ck.GateSequence(register=register, steps=steps)


# ------------------------------------------------------------------- reports

def emit_report(rep, version):
    out = ["report", f"version {version}"]
    out.append(f"delta {_fmt(rep.delta)}")
    out.append(f"eta-requested {_fmt(rep.eta_requested)}")
    out.append(f"eta-achieved {_fmt(rep.eta_achieved)}")
    out.append(f"eps-requested {_fmt(rep.eps_requested)}")
    out.append(f"eps-achieved {_fmt(rep.eps_achieved)}")
    out.append(f"rank {rep.low_dim}")
    out.append(f"target-dim {rep.target_dim}")
    out.append(f"shift {_fmt(rep.shift)}")
    out.append(f"pass {'true' if rep.passed else 'false'}")
    if not rep.passed:
        out.append(f"reason {rep.failure_reason().replace(' ', '-')}")
    for k, (a, b) in enumerate(zip(rep.sim_eigenvalues, rep.target_eigenvalues)):
        out.append(f"eigenvalue {k} {_fmt(a)} {_fmt(b)}")
    out.append("end")
    return "\n".join(out) + "\n"


def emit_scan(scan, version):
    out = ["scan", f"version {version}", "columns delta eps-achieved eta-achieved"]
    for d, e, h in zip(scan.deltas, scan.eps_achieved, scan.eta_achieved):
        out.append(f"row {_fmt(d)} {_fmt(e)} {_fmt(h)}")
    out.append("slope exact" if scan.exact else f"slope {_fmt(scan.slope)}")
    out.append("end")
    return "\n".join(out) + "\n"


# -------------------------------------------------------- routes and ledgers

def emit_route(plan):
    out = ["route"]
    for v in sorted(plan.assignment, key=str):
        pt = " ".join(str(int(x)) for x in plan.assignment[v])
        out.append(f"assign {v} {pt}")
    for e in sorted(plan.paths, key=lambda e: sorted(map(str, e))):
        a, b = sorted(e, key=str)
        pts = "  ".join(" ".join(str(int(x)) for x in q) for q in plan.paths[e])
        out.append(f"path {a} {b}  {pts}")
    for ea, eb, q in plan.crossings:
        a1, b1 = sorted(ea, key=str)
        a2, b2 = sorted(tuple(eb), key=str)
        out.append(f"crossing {a1} {b1} with {a2} {b2} at "
                   + " ".join(str(int(x)) for x in q))
    out.append("end")
    return "\n".join(out) + "\n"


def emit_ledger(entries):
    out = ["ledger"]
    for e in entries:
        consumed = " ".join("+".join(map(str, sig[0])) for sig in e.consumed) or "-"
        produced = " ".join(f"{'+'.join(map(str, sites))}:{_fmt(c)}"
                            for sites, c in e.produced)
        out.append(f"application {e.application_id} kind {e.kind} "
                   f"delta {_fmt(e.delta)} mediators "
                   + " ".join(map(str, e.mediators))
                   + f" consumed {consumed} realizes {produced}")
    out.append("end")
    return "\n".join(out) + "\n"
