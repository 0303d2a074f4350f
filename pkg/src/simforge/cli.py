"""Command-line front end.

Subcommands: validate, diag, verify, gadget, scan, tile, clock, compile.
Exit codes: 0 success/pass, 1 certified failure (a verification said no),
2 structural error (malformed input, impossible stage).  Reports are
deterministic: a fixed seed and identical inputs give byte-identical files.
"""

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import clock as ck
from . import documents as doc
from . import gadgets as gd
from . import geometry as geo
from . import pipeline as pl
from . import simulation as sim
from . import tiles as tl
from .errors import FormatError, RankMismatchError, SimforgeError
from .operators import FAMILY_MATRIX, HamiltonianExpr, LocalTerm, SiteSystem, low_spectrum


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read(path):
    with open(path) as fh:
        return fh.read()


def _fmt(x):
    return f"{float(x):.17g}"


# ----------------------------------------------------------------- commands

def cmd_validate(args):
    text = _read(args.input)
    head = text.lstrip().split(None, 1)[0] if text.strip() else ""
    parsers = {"hamiltonian": doc.parse_hamiltonian, "graph": doc.parse_graph,
               "tileset": doc.parse_tileset, "gates": doc.parse_gates,
               "plan": doc.parse_plan}
    if head not in parsers:
        raise FormatError(f"unknown document type {head!r}")
    value = parsers[head](text)
    lines = ["validation", f"version {__version__}", f"type {head}", "status ok"]
    if head == "hamiltonian":
        lines.append(f"sites {value.system.nsites}")
        lines.append(f"terms {len(value.terms)}")
        lines.append(f"dimension {value.system.total_dim}")
    if head == "graph":
        lines.append(f"vertices {len(list(value.vertices))}")
        lines.append(f"edges {len(value.edges)}")
    lines.append("end")
    _write(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_diag(args):
    expr = doc.parse_hamiltonian(_read(args.input))
    spec = low_spectrum(expr, k=args.k, seed=args.seed)
    lines = ["spectrum", f"version {__version__}", f"k {args.k}",
             f"residual {_fmt(spec.residual_tol)}"]
    for i, w in enumerate(spec.eigenvalues):
        lines.append(f"eigenvalue {i} {_fmt(w)}")
    lines.append("end")
    _write(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_verify(args):
    sim_expr = doc.parse_hamiltonian(_read(args.sim))
    tar_expr = doc.parse_hamiltonian(_read(args.target))
    iso = sim.LocalIsometry.identity(tar_expr.system)
    if sim_expr.system.ids != tar_expr.system.ids:
        raise FormatError("verify expects simulator and target on the same sites "
                          "(construction-specific isometries live in the library API)")
    shift = args.shift
    if shift not in (None, "fit"):
        shift = float(shift)
    try:
        rep = sim.verify_simulation(sim_expr, tar_expr, delta=args.delta,
                                    eta=args.eta, eps=args.eps, isometry=iso,
                                    shift=shift if shift is not None else 0.0,
                                    seed=args.seed)
    except RankMismatchError as exc:
        lines = ["report", f"version {__version__}", f"delta {_fmt(args.delta)}",
                 "pass false", f"reason rank-mismatch", f"detail {exc}", "end"]
        _write(args.output, "\n".join(lines) + "\n")
        return 1
    _write(args.output, doc.emit_report(rep, __version__))
    return 0 if rep.passed else 1


def _gadget_instance(kind, family, lam, mu, delta):
    h = FAMILY_MATRIX[family]
    if kind == "subdiv":
        names = ["q0", "q1"]
        edges = [(("q0", "q1"), lam)]
    elif kind == "fork":
        names = ["q0", "q1", "q2"]
        edges = [(("q0", "q2"), lam), (("q1", "q2"), mu)]
    elif kind == "crossing":
        names = ["q0", "q1", "q2", "q3"]
        edges = [(("q0", "q3"), lam), (("q1", "q2"), mu)]
    else:
        raise FormatError(f"unknown gadget kind {kind!r}")
    system = SiteSystem([(n, 2) for n in names])
    target = HamiltonianExpr(system, [LocalTerm(s, h, c) for s, c in edges if c])
    host = HamiltonianExpr(system, list(target.terms))
    if kind == "subdiv":
        out, app = gd.subdivide(host, ("q0", "q1"), lam, "+", delta, family=family)
    elif kind == "fork":
        out, app = gd.fork(host, ("q0", "q1", "q2"), lam, mu, delta, family=family)
    else:
        out, app = gd.crossing(host, (("q0", "q3"), ("q1", "q2")), lam, mu, delta,
                               family=family)
    return target, out, [app]


def cmd_gadget(args):
    target, out, apps = _gadget_instance(args.kind, args.family, args.lam, args.mu,
                                         args.delta)
    rep = gd.certify(out, apps, target, eta=args.eta, eps=args.eps, seed=args.seed)
    _write(args.output, doc.emit_report(rep, __version__))
    if args.emit_hamiltonian:
        _write(args.emit_hamiltonian, doc.emit_hamiltonian(out))
    return 0 if rep.passed else 1


def cmd_scan(args):
    deltas = [float(x) for x in args.deltas.split(",")]
    h = FAMILY_MATRIX[args.family]
    system = SiteSystem([("q0", 2), ("q1", 2)])
    target = HamiltonianExpr(system, [LocalTerm(("q0", "q1"), h, args.lam)])

    def builder(delta):
        host = HamiltonianExpr(system, list(target.terms))
        out, app = gd.subdivide(host, ("q0", "q1"), args.lam, "+", delta,
                                family=args.family)
        return out, [app]

    scan = gd.error_scan(target, builder, deltas, seed=args.seed)
    _write(args.output, doc.emit_scan(scan, __version__))
    return 0


BUILTIN_TILESETS = {
    "counter": lambda: tl.binary_counter_tileset(),
    "counter-mirrored": lambda: tl.binary_counter_tileset(mirrored=True),
    "marker": tl.marker_tileset,
    "square-flag": tl.square_flag_tileset,
}


def cmd_tile(args):
    if args.stack:
        stack = tl.solve_stack(args.width, args.height)
        dec = tl.decode_layers(stack)
        lines = ["tiling-stack", f"version {__version__}",
                 f"width {dec.W}", f"height {dec.H}",
                 f"width-value {dec.width_value}", f"height-value {dec.height_value}",
                 f"n {dec.n}", f"b {dec.b}",
                 f"triangle-cells {len(dec.triangle_cells)}",
                 f"square-cells {len(dec.square_cells)}"]
        for name, cfg in stack.layers().items():
            lines.append(f"layer {name}")
            lines += ["  " + row for row in cfg.dump().splitlines()]
        lines.append("end")
        _write(args.output, "\n".join(lines) + "\n")
        return 0
    if args.tileset in BUILTIN_TILESETS:
        ts = BUILTIN_TILESETS[args.tileset]()
    else:
        ts = doc.parse_tileset(_read(args.tileset))
    solver = tl.ground_exhaustive if args.solver == "exhaustive" else tl.ground_transfer
    res = solver(ts, args.width, args.height)
    lines = ["tiling", f"version {__version__}",
             f"width {args.width}", f"height {args.height}",
             f"energy {Fraction(res.energy)}", f"count {res.count}", "config"]
    lines += ["  " + row for row in res.config.dump().splitlines()]
    lines.append("end")
    _write(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_clock(args):
    lines = ["clock", f"version {__version__}"]
    if args.gap_scan:
        ts = [int(x) for x in args.gap_scan.split(",")]
        lines.append("columns T gap gap-times-T1-squared")
        for T, g, scaled in ck.gap_scan(ts):
            lines.append(f"row {T} {_fmt(g)} {_fmt(scaled)}")
    elif args.synth is not None:
        theta, delta = (float(x) for x in args.synth.split(","))
        res = ck.synthesize_rotation(theta, delta)
        lines.append(f"theta {_fmt(theta)}")
        lines.append(f"delta {_fmt(delta)}")
        lines.append(f"achieved {_fmt(res.achieved)}")
        lines.append(f"length {len(res.word)}")
        lines.append("word " + (" ".join(res.word) if res.word else "-"))
        lines.append(f"success {'true' if res.success else 'false'}")
    elif args.blink is not None:
        coupling = float(args.blink)
        grid = sim.CouplingGrid(n=1, alpha=np.array([[coupling]]),
                                beta=np.zeros((1, 1)), delta2=1.0)
        angles = ck.AngleField(grid, eps=0.1)
        prog = ck.field_program(angles, ck.snake_path(1))
        blink = ck.blink_schedule(prog, (0, 0))
        e = ck.blink_expectation(blink)
        lines.append(f"coupling {_fmt(coupling)}")
        lines.append(f"steps {blink.T}")
        lines.append(f"on-states {blink.on_states}")
        lines.append(f"expectation {_fmt(e)}")
    else:
        raise FormatError("clock needs one of --gap-scan / --synth / --blink")
    lines.append("end")
    _write(args.output, "\n".join(lines) + "\n")
    ok = True
    if args.synth is not None:
        ok = "success true" in "\n".join(lines)
    return 0 if ok else 1


def cmd_compile(args):
    target = doc.parse_hamiltonian(_read(args.target))
    host = doc.parse_graph(_read(args.host))
    params = geo.LocalityParams(c=args.ball_c, C=args.edge_length)
    res = pl.compile_target(target, host, params, family=args.family,
                            delta_base=args.delta_base, spacing=args.spacing,
                            eta=args.eta, eps=args.eps)
    lines = ["compilation", f"version {__version__}",
             f"plan-depth {res.depth}",
             f"domain-size {res.domain.size}",
             f"placements {len(res.placements)}"]
    for v in sorted(res.placements, key=str):
        lines.append(f"place {v} {res.placements[v]}")
    for rec in res.chains:
        lines.append(f"chain {rec.edge[0]} {rec.edge[1]} coupling {_fmt(rec.coupling)} "
                     f"length {len(rec.path) - 1} rounds {rec.rounds_used}")
    lines.append(f"terms {len(res.expr.terms)}")
    lines.append("end")
    _write(args.output, "\n".join(lines) + "\n")
    if args.emit_plan:
        _write(args.emit_plan, doc.emit_plan(res.plan))
    if args.emit_route:
        _write(args.emit_route, doc.emit_route(res.route))
    if args.emit_ledger:
        _write(args.emit_ledger, doc.emit_ledger(res.ledger))
    if args.emit_report and res.report is not None:
        _write(args.emit_report, doc.emit_report(res.report, __version__))
    if res.report is not None and not res.report.passed:
        return 1
    return 0


# -------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="simforge", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    subs = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--output", "-o", default="-")
        sp.add_argument("--seed", type=int, default=0)

    sp = subs.add_parser("validate", help="parse a document and check invariants")
    sp.add_argument("--input", "-i", required=True)
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = subs.add_parser("diag", help="low spectrum of a Hamiltonian document")
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--k", type=int, default=4)
    common(sp)
    sp.set_defaults(func=cmd_diag)

    sp = subs.add_parser("verify", help="certify a simulator against a target")
    sp.add_argument("--sim", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--eta", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--shift", default=None)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = subs.add_parser("gadget", help="build and certify one mediator gadget")
    sp.add_argument("--kind", choices=["subdiv", "fork", "crossing"], required=True)
    sp.add_argument("--family", choices=["heisenberg", "xy"], default="heisenberg")
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--mu", type=float, default=0.0)
    sp.add_argument("--delta", type=float, default=1e4)
    sp.add_argument("--eta", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--emit-hamiltonian", default=None)
    common(sp)
    sp.set_defaults(func=cmd_gadget)

    sp = subs.add_parser("scan", help="heavy-scale error sweep of a subdivision")
    sp.add_argument("--family", choices=["heisenberg", "xy"], default="heisenberg")
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--deltas", default="1e2,1e3,1e4,1e5")
    common(sp)
    sp.set_defaults(func=cmd_scan)

    sp = subs.add_parser("tile", help="tiling ground states and layer stacks")
    sp.add_argument("--tileset", default="counter")
    sp.add_argument("--width", type=int, required=True)
    sp.add_argument("--height", type=int, required=True)
    sp.add_argument("--solver", choices=["transfer", "exhaustive"], default="transfer")
    sp.add_argument("--stack", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_tile)

    sp = subs.add_parser("clock", help="clock gaps, rotation synthesis, blinking")
    sp.add_argument("--gap-scan", default=None)
    sp.add_argument("--synth", default=None, metavar="THETA,DELTA")
    sp.add_argument("--blink", default=None, metavar="COUPLING")
    common(sp)
    sp.set_defaults(func=cmd_clock)

    sp = subs.add_parser("compile", help="compile a target onto a host graph")
    sp.add_argument("--target", required=True)
    sp.add_argument("--host", required=True)
    sp.add_argument("--ball-c", type=int, default=5)
    sp.add_argument("--edge-length", type=float, default=1.0)
    sp.add_argument("--family", choices=["heisenberg", "xy"], default="heisenberg")
    sp.add_argument("--delta-base", type=float, default=1e4)
    sp.add_argument("--spacing", type=float, default=None)
    sp.add_argument("--eta", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--emit-plan", default=None)
    sp.add_argument("--emit-route", default=None)
    sp.add_argument("--emit-ledger", default=None)
    sp.add_argument("--emit-report", default=None)
    common(sp)
    sp.set_defaults(func=cmd_compile)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, pl.StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
