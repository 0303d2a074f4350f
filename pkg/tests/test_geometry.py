import itertools

import numpy as np
import pytest

from simforge import geometry as geo
from simforge.errors import DomainError, RoutingError, SimforgeError


# ---------------------------------------------------------------- locality

def test_locality_square_patch_passes():
    G = geo.square_lattice(4, 4)
    rep = geo.check_locality(G, geo.LocalityParams(c=5, C=1.0))
    assert rep.passed


def test_locality_long_edge_fails():
    G = geo.EmbeddedGraph(2, {"a": (0, 0), "b": (10, 0)}, [("a", "b")])
    rep = geo.check_locality(G, geo.LocalityParams(c=5, C=2.0))
    assert not rep.passed
    assert rep.edge_violations and rep.edge_violations[0][2] == 10.0


def test_locality_dense_ball_fails():
    G = geo.EmbeddedGraph(2, {"a": (0, 0), "b": (0.05, 0), "c": (0, 0.05)}, [])
    rep = geo.check_locality(G, geo.LocalityParams(c=2, C=1.0))
    assert not rep.passed
    assert rep.ball_violations


def test_invariance_check():
    G = geo.square_lattice(4, 4)
    assert geo.check_invariance(G) > 0
    bad = geo.EmbeddedGraph(1, {"a": (0,), "b": (1,), "c": (2,)},
                            [("a", "b")], basis=[(1.0,)])
    with pytest.raises(SimforgeError):
        geo.check_invariance(bad)


# ---------------------------------------------------------------- snapping

def test_snap_simple():
    G = geo.EmbeddedGraph(2, {"a": (0.1, 0.2), "b": (0.9, 1.1)}, [])
    res = geo.snap_to_grid(G, 1.0)
    assert res.assignment["a"] == (0, 0)
    assert res.assignment["b"] == (1, 1)
    assert res.factor == 0


def test_snap_collision_halves():
    G = geo.EmbeddedGraph(2, {"a": (0.1, 0.1), "b": (-0.1, 0.1)}, [])
    res = geo.snap_to_grid(G, 1.0)
    assert res.factor >= 1
    assert res.assignment["a"] != res.assignment["b"]
    for v in ("a", "b"):
        disp = np.linalg.norm(np.array(res.assignment[v]) * res.spacing - G.coords[v])
        assert disp <= 1.0 * np.sqrt(2)


def test_snap_exact_grid_point_unchanged():
    G = geo.EmbeddedGraph(2, {"a": (2.0, 3.0)}, [])
    assert geo.snap_to_grid(G, 1.0).assignment["a"] == (2, 3)


def test_snap_underflow():
    G = geo.EmbeddedGraph(2, {"a": (0, 0), "b": (1e-9, 0)}, [])
    with pytest.raises(SimforgeError):
        geo.snap_to_grid(G, 1.0)


# ----------------------------------------------------------------- routing

def test_route_parallel_edges():
    assignment = {"a": (0, 0), "b": (3, 0), "c": (0, 1), "d": (3, 1)}
    plan = geo.route_paths(assignment, [("a", "b"), ("c", "d")])
    assert len(plan.paths) == 2
    assert not plan.crossings
    interiors = [set(p[1:-1]) for p in plan.paths.values()]
    assert not (interiors[0] & interiors[1])


def test_route_crossing_declared_in_2d():
    # an X of terminals that cannot be routed disjointly through the middle
    assignment = {"a": (0, 0), "b": (2, 2), "c": (0, 2), "d": (2, 0)}
    blockers = {}
    k = 0
    # wall off the outside so the paths must share the center
    for x in range(-1, 4):
        for y in (-1, 3):
            blockers[f"w{k}"] = (x, y)
            k += 1
    for y in range(0, 3):
        for x in (-1, 3):
            blockers[f"w{k}"] = (x, y)
            k += 1
    assignment.update(blockers)
    plan = geo.route_paths(assignment, [("a", "b"), ("c", "d")],
                           allow_crossings=True, margin=0)
    assert len(plan.crossings) == 1
    point = plan.crossings[0][2]
    assert point == (1, 1)


def test_route_same_instance_in_3d_avoids_crossing():
    assignment = {"a": (0, 0, 0), "b": (2, 2, 0), "c": (0, 2, 0), "d": (2, 0, 0)}
    plan = geo.route_paths(assignment, [("a", "b"), ("c", "d")])
    assert not plan.crossings
    interiors = [set(p[1:-1]) for p in plan.paths.values()]
    assert not (interiors[0] & interiors[1])


def test_route_failure_reports():
    assignment = {"a": (0, 0), "b": (2, 0), "w1": (1, 0), "w2": (1, 1), "w3": (1, -1),
                  "w4": (1, 2), "w5": (1, -2), "w6": (1, 3), "w7": (1, -3)}
    blocked_edges = [("a", "b")]
    with pytest.raises(RoutingError):
        geo.route_paths(assignment, blocked_edges, margin=0)


# ------------------------------------------------------------------ domains

def test_square_lattice_domain():
    G = geo.square_lattice(11, 11)
    dom = geo.extract_domain(G, window=3)
    assert dom.size == 1
    assert np.allclose(dom.basis[0], (1, 0))
    assert np.allclose(dom.basis[1], (0, 1))


def test_hexagonal_lattice_domain():
    G = geo.hexagonal_lattice(14, 14)
    dom = geo.extract_domain(G, window=3)
    assert dom.size == 2
    cells = geo.grid_minor_certificate(dom, span=6)
    assert len(cells) == 36


def test_subdivided_square_domain():
    G = geo.subdivided_square_lattice(11, 11)
    dom = geo.extract_domain(G, window=3)
    assert dom.size == 3
    geo.grid_minor_certificate(dom, span=4)


def test_domain_requires_basis():
    G = geo.EmbeddedGraph(2, {"a": (0, 0)}, [])
    with pytest.raises(DomainError):
        geo.extract_domain(G)


def test_domain_window_too_small():
    G = geo.square_lattice(3, 3)
    with pytest.raises(DomainError):
        dom = geo.extract_domain(G, window=4)
        geo.grid_minor_certificate(dom, span=6)


# ------------------------------------------------------------ central vertex

def star_graph():
    coords = {"c": (0, 0), "x": (1, 0), "y": (0, 1), "z": (-1, 0)}
    return geo.EmbeddedGraph(2, coords, [("c", "x"), ("c", "y"), ("c", "z")])


def test_central_vertex_star():
    G = star_graph()
    y, paths = geo.central_vertex(G, ["c", "x", "y", "z"], ["x", "y", "z"])
    assert y == "c"
    assert all(p[0] == "c" for p in paths)


def test_central_vertex_path_graph():
    G = geo.EmbeddedGraph(1, {"a": (0,), "b": (1,), "c": (2,)}, [("a", "b"), ("b", "c")])
    y, paths = geo.central_vertex(G, ["a", "b", "c"], ["a", "c", "b"])
    assert y == "b"


def test_central_vertex_random_tree():
    # 7-vertex tree with 3 leaves; disjointness checked exhaustively
    coords = {k: (float(k), 0.0) for k in range(7)}
    edges = [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5), (5, 6)]
    G = geo.EmbeddedGraph(2, coords, edges)
    y, paths = geo.central_vertex(G, list(range(7)), [3, 4, 6])
    for a, b in itertools.combinations(paths, 2):
        assert not (set(a[1:]) & set(b[1:]))
    for p, port in zip(paths, [3, 4, 6]):
        assert p[0] == y and p[-1] == port
        for u, v in zip(p, p[1:]):
            assert G.has_edge(u, v)


def test_central_vertex_fewer_ports():
    G = star_graph()
    y, paths = geo.central_vertex(G, ["c", "x", "y", "z"], ["x"])
    assert y == "x"
    y, paths = geo.central_vertex(G, ["c", "x", "y", "z"], ["x", "y"])
    assert y == "x" and paths[1][-1] == "y"
