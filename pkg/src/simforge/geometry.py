"""Geometric interaction graphs: locality, snapping, routing, and the
repeating-cell structure of translationally-invariant graphs.

Graphs are finite embedded patches; translational invariance is declared by
basis vectors and certified on a finite test window (the infinite-graph
statements hold only as far as the window shows).  The domain extractor
implements the inductive construction: grow a connected cell T one basis
direction at a time by walking a shortest path to the first translate ahead
and truncating at the first self-overlap; every claimed property is then
re-verified exhaustively on the window.
"""

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RoutingError, SimforgeError

COORD_TOL = 1e-9


@dataclass(frozen=True)
class LocalityParams:
    """c: max vertices in any unit ball; C: max edge length."""

    c: int
    C: float

    def __post_init__(self):
        if self.c < 1 or self.C <= 0:
            raise SimforgeError("need c >= 1 and C > 0")


class EmbeddedGraph:
    """Vertices with coordinates in R^D plus undirected edges."""

    def __init__(self, D, coords, edges, basis=None):
        self.D = int(D)
        self.coords = {}
        for v, x in coords.items():
            x = np.asarray(x, dtype=float).reshape(-1)
            if x.shape != (self.D,) or not np.all(np.isfinite(x)):
                raise SimforgeError(f"vertex {v!r}: bad coordinate {x}")
            self.coords[v] = x
        self.edges = set()
        for a, b in edges:
            if a not in self.coords or b not in self.coords:
                raise SimforgeError(f"edge ({a!r}, {b!r}) references unknown vertex")
            if a == b:
                raise SimforgeError("self-loops not allowed")
            self.edges.add(frozenset((a, b)))
        self.basis = None
        if basis is not None:
            self.basis = tuple(np.asarray(b, dtype=float) for b in basis)
            for b in self.basis:
                if b.shape != (self.D,):
                    raise SimforgeError("basis vector dimension mismatch")
        self._adj = {v: set() for v in self.coords}
        for e in self.edges:
            a, b = tuple(e)
            self._adj[a].add(b)
            self._adj[b].add(a)
        self._lookup = {self._key(x): v for v, x in self.coords.items()}

    @staticmethod
    def _key(x):
        return tuple(np.round(np.asarray(x, dtype=float) / COORD_TOL / 16.0).astype(np.int64))

    def vertex_at(self, x):
        """Vertex at coordinate x (within tolerance), or None."""
        return self._lookup.get(self._key(x))

    def neighbors(self, v):
        return self._adj[v]

    @property
    def vertices(self):
        return self.coords.keys()

    def has_edge(self, a, b):
        return frozenset((a, b)) in self.edges

    def degree(self, v):
        return len(self._adj[v])

    def shortest_path(self, sources, targets, blocked=()):
        """BFS path from any source to any target, or None."""
        blocked = set(blocked)
        targets = set(targets) - blocked
        frontier = [s for s in sources if s not in blocked]
        prev = {s: None for s in frontier}
        while frontier:
            nxt = []
            for u in frontier:
                if u in targets:
                    path = [u]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                for w in self._adj[u]:
                    if w not in prev and w not in blocked:
                        prev[w] = u
                        nxt.append(w)
            frontier = nxt
        return None


@dataclass
class LocalityReport:
    passed: bool
    ball_violations: list
    edge_violations: list


def check_locality(G, params):
    """Closed unit balls hold <= c vertices; edges are <= C long."""
    from scipy.spatial import cKDTree
    ids = list(G.vertices)
    pts = np.array([G.coords[v] for v in ids])
    tree = cKDTree(pts)
    counts = tree.query_ball_point(pts, 1.0 + COORD_TOL, return_length=True)
    ball_viol = [(ids[k], int(counts[k])) for k in range(len(ids)) if counts[k] > params.c]
    edge_viol = []
    for e in sorted(G.edges, key=lambda e: sorted(map(str, e))):
        a, b = tuple(e)
        length = float(np.linalg.norm(G.coords[a] - G.coords[b]))
        if length > params.C + COORD_TOL:
            edge_viol.append((a, b, length))
    return LocalityReport(not ball_viol and not edge_viol, ball_viol, edge_viol)


def check_invariance(G):
    """Certify invariance as far as the finite patch shows.

    Central vertices (inner half of the patch in basis coordinates) must
    have images under every basis shift; wherever both endpoints of an edge
    map, the image pair must be an edge, and conversely a mapped non-edge
    pair must not become an edge.  Returns the number of checked vertices.
    """
    if not G.basis:
        raise SimforgeError("graph has no declared basis")
    pts = np.array([G.coords[v] for v in G.vertices])
    centroid = pts.mean(axis=0)
    B = np.array(G.basis).T
    if B.shape[0] != B.shape[1] or abs(np.linalg.det(B)) < 1e-12:
        raise SimforgeError("basis vectors do not span the embedding space")
    coeffs = np.linalg.solve(B, (pts - centroid).T).T
    half = (coeffs.max(axis=0) - coeffs.min(axis=0)) / 2.0
    ids = list(G.vertices)
    central = {ids[k] for k in range(len(ids))
               if np.all(np.abs(coeffs[k]) <= half - 1.0 + COORD_TOL)}
    checked = 0
    for b in G.basis:
        image = {}
        for v, x in G.coords.items():
            w = G.vertex_at(x + b)
            if w is not None:
                image[v] = w
        for v in central:
            if v not in image:
                raise SimforgeError(f"central vertex {v!r} has no image under a basis shift")
            checked += 1
        mapped = set(image)
        for p in mapped:
            for q in mapped:
                if p is q:
                    continue
                if G.has_edge(p, q) != G.has_edge(image[p], image[q]):
                    raise SimforgeError(
                        f"adjacency of ({p!r}, {q!r}) not preserved by a basis shift")
    return checked


# ---------------------------------------------------------------- lattices

def square_lattice(W, H):
    coords = {f"{i},{j}": (float(i), float(j)) for i in range(W) for j in range(H)}
    edges = []
    for i in range(W):
        for j in range(H):
            if i + 1 < W:
                edges.append((f"{i},{j}", f"{i + 1},{j}"))
            if j + 1 < H:
                edges.append((f"{i},{j}", f"{i},{j + 1}"))
    return EmbeddedGraph(2, coords, edges, basis=[(1.0, 0.0), (0.0, 1.0)])


def hexagonal_lattice(nx, ny):
    """Honeycomb patch: two vertices per cell, unit-ish edges, brick embedding."""
    coords = {}
    edges = []
    for i in range(nx):
        for j in range(ny):
            a = f"a{i},{j}"
            b = f"b{i},{j}"
            coords[a] = (2.0 * i + 0.5 * j, 1.5 * j)
            coords[b] = (2.0 * i + 0.5 * j + 1.0, 1.5 * j + 0.5)
            edges.append((a, b))
            if i + 1 < nx:
                edges.append((b, f"a{i + 1},{j}"))
            if j + 1 < ny:
                edges.append((b, f"a{i},{j + 1}"))
    return EmbeddedGraph(2, coords, edges, basis=[(2.0, 0.0), (0.5, 1.5)])


def subdivided_square_lattice(W, H):
    """Square lattice with every edge subdivided once (three-vertex cell)."""
    coords = {}
    edges = []
    for i in range(W):
        for j in range(H):
            coords[f"v{i},{j}"] = (float(i), float(j))
            if i + 1 < W:
                coords[f"h{i},{j}"] = (i + 0.5, float(j))
                edges.append((f"v{i},{j}", f"h{i},{j}"))
                edges.append((f"h{i},{j}", f"v{i + 1},{j}"))
            if j + 1 < H:
                coords[f"u{i},{j}"] = (float(i), j + 0.5)
                edges.append((f"v{i},{j}", f"u{i},{j}"))
                edges.append((f"u{i},{j}", f"v{i},{j + 1}"))
    return EmbeddedGraph(2, coords, edges, basis=[(1.0, 0.0), (0.0, 1.0)])


def hypercubic_lattice(D, side):
    coords = {}
    edges = []
    for p in itertools.product(range(side), repeat=D):
        coords[",".join(map(str, p))] = tuple(float(x) for x in p)
    for p in itertools.product(range(side), repeat=D):
        for ax in range(D):
            q = list(p)
            q[ax] += 1
            if q[ax] < side:
                edges.append((",".join(map(str, p)), ",".join(map(str, q))))
    basis = [tuple(1.0 if k == ax else 0.0 for k in range(D)) for ax in range(D)]
    return EmbeddedGraph(D, coords, edges, basis=basis)


# ---------------------------------------------------------------- snapping

@dataclass
class SnapResult:
    spacing: float
    factor: int                  # halvings applied to the requested spacing
    assignment: dict             # vertex -> integer grid point (tuple)

    def point(self, v):
        return self.assignment[v]


def snap_to_grid(G, spacing):
    """Assign each vertex the nearest point of the spacing-a hypercubic grid,
    halving the spacing (up to 2^20) until the assignment is injective."""
    s = float(spacing)
    for halvings in range(21):
        assignment = {}
        taken = {}
        ok = True
        for v in sorted(G.vertices, key=str):
            p = tuple(int(x) for x in np.round(np.asarray(G.coords[v]) / s))
            if p in taken:
                ok = False
                break
            taken[p] = v
            assignment[v] = p
        if ok:
            for v, p in assignment.items():
                disp = np.linalg.norm(np.asarray(p) * s - G.coords[v])
                if disp > s * math.sqrt(G.D) + COORD_TOL:
                    raise SimforgeError("snap displacement bound violated")
            return SnapResult(s, halvings, assignment)
        s /= 2.0
    raise SimforgeError("grid spacing underflow: input is not geometrically local")


# ----------------------------------------------------------------- routing

@dataclass
class RoutePlan:
    assignment: dict             # vertex -> grid point
    paths: dict                  # frozenset(edge) -> tuple of grid points
    crossings: list              # (edge_a, edge_b, point)

    def all_path_vertices(self):
        out = {}
        for e, p in self.paths.items():
            for q in p[1:-1]:
                out.setdefault(q, []).append(e)
        return out


def _grid_neighbors(p):
    for ax in range(len(p)):
        for d in (-1, 1):
            q = list(p)
            q[ax] += d
            yield tuple(q)


def _bfs_grid(start, goal, blocked, bounds, crossable=None):
    """Shortest grid path avoiding ``blocked``.

    Dijkstra over (vertex, incoming direction) states with a small turn
    penalty (keeps paths straight where possible).  ``crossable`` maps an
    occupied vertex to the axis along which its host path runs straight;
    such a vertex may be stepped on transversally (enter perpendicular,
    leave straight) at a large declared-crossing cost.
    """
    lo, hi = bounds
    crossable = crossable or {}
    D = len(start)
    dirs = [(ax, sgn) for ax in range(D) for sgn in (-1, 1)]
    dist = {(start, -1): 0.0}
    prev = {}
    pq = [(0.0, start, -1)]
    while pq:
        d, u, din = heapq.heappop(pq)
        if u == goal:
            path = [(u, din)]
            while path[-1] in prev:
                path.append(prev[path[-1]])
            return [p for p, _ in path[::-1]]
        if d > dist.get((u, din), np.inf):
            continue
        for k, (ax, sgn) in enumerate(dirs):
            if u in crossable and din >= 0 and k != din:
                continue                      # must leave a crossing straight
            w = list(u)
            w[ax] += sgn
            w = tuple(w)
            if any(w[m] < lo[m] or w[m] > hi[m] for m in range(D)):
                continue
            step = 1.0 + (0.001 if din >= 0 and k != din else 0.0)
            if w in blocked and w != goal:
                host_axis = crossable.get(w)
                if host_axis is None or host_axis == ax:
                    continue
                step += 1000.0
            nd = d + step
            if nd < dist.get((w, k), np.inf):
                dist[(w, k)] = nd
                prev[(w, k)] = (u, din)
                heapq.heappush(pq, (nd, w, k))
    return None


RETRY_BUDGET = 8


def route_paths(assignment, edges, *, allow_crossings=False, margin=3):
    """Vertex-disjoint grid paths for every edge, longest first.

    Failed routes trigger rip-up-and-reroute of the paths blocking them, up
    to ``RETRY_BUDGET`` rounds; in two dimensions residual conflicts may be
    declared as crossings when ``allow_crossings`` is set.  Raises
    :class:`RoutingError` (suggesting a finer grid) when routing fails.
    """
    pts = np.array(list(assignment.values()))
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    bounds = (lo, hi)
    edges = [tuple(e) for e in edges]
    order = sorted(edges, key=lambda e: (-_l1(assignment[e[0]], assignment[e[1]]),
                                         str(e)))
    terminals = {p: v for v, p in assignment.items()}
    paths = {}
    crossings = []
    queue = list(order)
    retries = 0
    while queue:
        a, b = queue.pop(0)
        pa, pb = assignment[a], assignment[b]
        blocked = set()
        for e2, p in paths.items():
            blocked.update(p[1:-1])
        blocked |= {p for p, v in terminals.items() if v not in (a, b)}
        path = _bfs_grid(pa, pb, blocked, bounds)
        if path is None and retries < RETRY_BUDGET:
            # rip up any routed path whose interior enters this edge's box
            retries += 1
            box_lo = np.minimum(pa, pb) - 1
            box_hi = np.maximum(pa, pb) + 1
            ripped = []
            for e2, p in list(paths.items()):
                if any(np.all(np.asarray(q) >= box_lo) and np.all(np.asarray(q) <= box_hi)
                       for q in p[1:-1]):
                    ripped.append(e2)
                    del paths[e2]
            if ripped:
                queue.insert(0, (a, b))
                queue.extend(tuple(e2) for e2 in ripped)
                continue
        if path is None and allow_crossings and len(pa) == 2:
            hosts = {}
            owner = {}
            for e2, p in paths.items():
                for idx in range(1, len(p) - 1):
                    axes = [m for m in range(2) if p[idx + 1][m] - p[idx - 1][m] != 0]
                    if len(axes) == 1:        # host runs straight here
                        hosts[p[idx]] = axes[0]
                        owner[p[idx]] = e2
            path = _bfs_grid(pa, pb, blocked, bounds, crossable=hosts)
            if path is not None:
                for q in path[1:-1]:
                    if q in hosts:
                        crossings.append((owner[q], (a, b), q))
        if path is None:
            raise RoutingError(
                f"could not route {a!r}-{b!r}; halve the grid spacing and retry")
        paths[frozenset((a, b))] = tuple(path)
    return RoutePlan(dict(assignment), paths, crossings)


def _l1(p, q):
    return int(sum(abs(x - y) for x, y in zip(p, q)))


# ------------------------------------------------------ fundamental domains

@dataclass
class FundamentalDomain:
    graph: EmbeddedGraph
    cell: tuple                  # vertex ids of T (connected)
    basis: tuple                 # effective basis vectors w_i
    ports: dict                  # direction index -> (inside vertex, outside vertex)
    window: int

    @property
    def size(self):
        return len(self.cell)

    def translate_cell(self, k):
        """Vertex ids of T + sum k_i w_i, or None if not fully on the patch."""
        shift = sum(ki * wi for ki, wi in zip(k, self.basis))
        out = []
        for v in self.cell:
            w = self.graph.vertex_at(self.graph.coords[v] + shift)
            if w is None:
                return None
            out.append(w)
        return tuple(out)


def _translate_set(G, vertices, shift):
    out = set()
    for v in vertices:
        w = G.vertex_at(G.coords[v] + shift)
        if w is not None:
            out.add(w)
    return out


def extract_domain(G, *, window=5):
    """Connected repeating cell T and effective basis, by the inductive walk.

    Stage j: with T_j invariant-disjoint under the partial basis, take the
    spanned surface S_j, find the largest self-overlap offset s_j along the
    next input basis vector, walk a shortest path toward the translates
    beyond s_j, cut it at the first vertex that lands in a translate of the
    walked set, and absorb the stub.  All claimed disjointness and adjacency
    is then certified exhaustively on the +/- ``window`` cell range.
    """
    if not G.basis:
        raise DomainError("graph has no declared basis")
    check_invariance(G)
    D = len(G.basis)
    pts = np.array([G.coords[v] for v in G.vertices])
    centroid = pts.mean(axis=0)
    start = min(G.vertices, key=lambda v: (float(np.linalg.norm(G.coords[v] - centroid)),
                                           str(v)))
    T = [start]
    ws = []
    for j in range(D):
        vj = G.basis[j]
        # spanned surface: all translates of T under the partial basis
        S = set()
        for k in itertools.product(range(-window, window + 1), repeat=len(ws)):
            shift = sum(ki * wi for ki, wi in zip(k, ws)) if ws else np.zeros(G.D)
            S |= _translate_set(G, T, shift)
        s_j = 0
        for s in range(1, window + 1):
            if S & _translate_set(G, S, -s * vj):
                s_j = s
        targets = set()
        for m in range(s_j + 1, s_j + window + 1):
            targets |= _translate_set(G, S, m * vj)
        if not targets:
            raise DomainError(f"window too small to reach translates along direction {j}")
        path = G.shortest_path(list(T), targets)
        if path is None:
            raise DomainError("patch is disconnected between translates")
        walked = set(T) | set(path)
        # translates of (path + T) strictly ahead along v_j
        ahead = {}
        for lj in range(s_j + 1, s_j + window + 1):
            for k in itertools.product(range(-window, window + 1), repeat=len(ws)):
                shift = lj * vj + (sum(ki * wi for ki, wi in zip(k, ws)) if ws else 0)
                for v in walked:
                    img = G.vertex_at(G.coords[v] + shift)
                    if img is not None and img not in ahead:
                        ahead[img] = (lj, k)
        cut = None
        for idx, v in enumerate(path):
            if v in ahead:
                cut = idx
                break
        if cut is None:
            raise DomainError("path never meets a forward translate; enlarge the window")
        lj, k = ahead[path[cut]]
        w_new = lj * np.asarray(vj, dtype=float) + (
            sum(ki * np.asarray(wi) for ki, wi in zip(k, ws)) if ws else 0)
        for v in path[:cut]:
            if v not in T:
                T.append(v)
        ws.append(np.asarray(w_new, dtype=float))
    domain = FundamentalDomain(G, tuple(T), tuple(ws), {}, window)
    _certify_domain(domain)
    domain.ports.update(_find_ports(domain))
    return domain


def _certify_domain(domain, span=None):
    """Exhaustive window checks: connectivity, pairwise-disjoint translates,
    and an inter-translate edge in every basis direction."""
    G = domain.graph
    T = set(domain.cell)
    sub = {v for v in T}
    comp = {next(iter(sub))}
    frontier = list(comp)
    while frontier:
        u = frontier.pop()
        for w in G.neighbors(u):
            if w in sub and w not in comp:
                comp.add(w)
                frontier.append(w)
    if comp != sub:
        raise DomainError("cell is not connected")
    span = span or domain.window
    D = len(domain.basis)
    for k in itertools.product(range(-span, span + 1), repeat=D):
        if all(x == 0 for x in k):
            continue
        shift = sum(ki * wi for ki, wi in zip(k, domain.basis))
        if _translate_set(G, T, shift) & T:
            raise DomainError(f"cell overlaps its translate at offset {k}")
    for i, wi in enumerate(domain.basis):
        cellp = domain.translate_cell(tuple(1 if a == i else 0 for a in range(D)))
        if cellp is None:
            raise DomainError("window too small to certify adjacency")
        if not any(G.has_edge(u, v) for u in T for v in cellp):
            raise DomainError(f"no edge between the cell and its +w_{i} translate")


def _find_ports(domain):
    G = domain.graph
    D = len(domain.basis)
    ports = {}
    for i in range(D):
        for sign in (+1, -1):
            k = tuple(sign if a == i else 0 for a in range(D))
            cellp = domain.translate_cell(k)
            if cellp is None:
                continue
            found = None
            for u in domain.cell:
                for v in cellp:
                    if G.has_edge(u, v):
                        found = (u, v)
                        break
                if found:
                    break
            ports[(i, sign)] = found
    return ports


def grid_minor_certificate(domain, span):
    """Verify the contracted window grid: disjoint connected branch sets and
    the full set of inter-cell edges over a span x ... x span window."""
    G = domain.graph
    D = len(domain.basis)
    cells = {}
    for k in itertools.product(range(span), repeat=D):
        cell = domain.translate_cell(k)
        if cell is None:
            raise DomainError(f"window too small: translate {k} leaves the patch")
        cells[k] = set(cell)
    seen = {}
    for k, cell in cells.items():
        for v in cell:
            if v in seen:
                raise DomainError(f"branch sets {seen[v]} and {k} overlap at {v!r}")
            seen[v] = k
    for k in cells:
        for ax in range(D):
            k2 = tuple(k[a] + (1 if a == ax else 0) for a in range(D))
            if k2 not in cells:
                continue
            if not any(G.has_edge(u, v) for u in cells[k] for v in cells[k2]):
                raise DomainError(f"missing contracted edge {k} ~ {k2}")
    return cells


# ------------------------------------------------------------ central vertex

def central_vertex(G, cell, ports):
    """Vertex of the cell with internally disjoint paths to <= 3 ports.

    Walks the port-1 to port-2 path, then the shortest path from port 3 to
    it; the meeting point is the center.  Returns (center, paths to each
    port in order).
    """
    cell = list(cell)
    sub = set(cell)

    def sp(srcs, dsts, blocked=()):
        path = _subgraph_path(G, sub, srcs, dsts, blocked)
        if path is None:
            raise DomainError("cell disconnected between ports")
        return path

    ports = list(ports)
    if not ports:
        raise DomainError("need at least one port")
    if len(ports) == 1:
        return ports[0], [(ports[0],)]
    p12 = sp([ports[0]], [ports[1]])
    if len(ports) == 2:
        return ports[0], [(ports[0],), tuple(p12)]
    p3 = sp([ports[2]], p12)
    y = p3[-1]
    idx = p12.index(y)
    path1 = tuple(p12[:idx + 1][::-1])
    path2 = tuple(p12[idx:])
    path3 = tuple(p3[::-1])
    for a, b in ((path1, path2), (path1, path3), (path2, path3)):
        shared = set(a[1:]) & set(b[1:])
        if shared:
            raise DomainError(f"central paths overlap at {shared}")
    return y, [path1, path2, path3]


def _subgraph_path(G, sub, srcs, dsts, blocked=()):
    blocked = set(blocked)
    dsts = set(dsts)
    frontier = [s for s in srcs if s in sub and s not in blocked]
    prev = {s: None for s in frontier}
    while frontier:
        nxt = []
        for u in frontier:
            if u in dsts:
                path = [u]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            for w in G.neighbors(u):
                if w in sub and w not in prev and w not in blocked:
                    prev[w] = u
                    nxt.append(w)
        frontier = nxt
    return None
