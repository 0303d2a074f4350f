"""Weighted tiling Hamiltonians on finite grids.

A tileset assigns each lattice cell one label; the (diagonal) energy counts
one unit per incompatible adjacent pair, one per violated boundary marker,
plus the per-tile site weights.  Edge colors define compatibility (equal
colors match); the reserved color ``"-"`` matches nothing, so a tile
carrying it can only sit with that side on the lattice boundary without
penalty.  Site weights are exact half-integers and all energies are handled
as integers equal to twice the physical value, so minimizer counting never
meets floating-point ties.

Cell addressing: the public API uses ``(i, j)`` = (column from the left,
height from the bottom).  Stored grids are (H, W) integer arrays with row 0
at the top.

Solvers: ``ground_exhaustive`` enumerates every assignment,
``ground_transfer`` runs an exact row-profile dynamic program; both count
minimizers and agree wherever both run.  Conditional solving (an
``allowed`` table restricting labels per cell) implements layer
composition: marker layers are penalty-only and satisfiable given the
counter grounds, so solving them conditioned on the unique lower-layer
ground reproduces the joint ground exactly.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import SimforgeError

VOID = "-"
_HARD = 1 << 20   # twice-energy penalty for disallowed labels; beyond any soft sum


@dataclass(frozen=True)
class Tile:
    label: str
    top: str
    right: str
    bottom: str
    left: str
    weight: Fraction = Fraction(0)

    def mirrored(self):
        """Reflection across the lower-left to upper-right diagonal."""
        return Tile(self.label, top=self.right, right=self.top,
                    bottom=self.left, left=self.bottom, weight=self.weight)


class Tileset:
    """Tiles plus optional per-lattice-edge allowed-label sets."""

    def __init__(self, tiles, boundary=None):
        self.tiles = tuple(tiles)
        labels = [t.label for t in self.tiles]
        if len(set(labels)) != len(labels):
            raise SimforgeError("tile labels are not unique")
        self.labels = tuple(labels)
        self._index = {lab: k for k, lab in enumerate(labels)}
        self.boundary = {side: (None if allowed is None else frozenset(allowed))
                         for side, allowed in (boundary or {}).items()}
        for side in self.boundary:
            if side not in ("top", "bottom", "left", "right"):
                raise SimforgeError(f"unknown boundary side {side!r}")
        for t in self.tiles:
            if Fraction(t.weight).limit_denominator(2) != Fraction(t.weight):
                raise SimforgeError(f"tile {t.label!r}: weight must be a half-integer")

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise SimforgeError(f"unknown tile label {label!r}") from None

    @property
    def ntiles(self):
        return len(self.tiles)

    def h_ok(self, left_label, right_label):
        a = self.tiles[self.index(left_label)]
        b = self.tiles[self.index(right_label)]
        return a.right == b.left and a.right != VOID

    def v_ok(self, upper_label, lower_label):
        a = self.tiles[self.index(upper_label)]
        b = self.tiles[self.index(lower_label)]
        return a.bottom == b.top and a.bottom != VOID

    def mirrored(self):
        bnd = {}
        src = self.boundary
        bnd["top"] = src.get("right")
        bnd["right"] = src.get("top")
        bnd["bottom"] = src.get("left")
        bnd["left"] = src.get("bottom")
        return Tileset([t.mirrored() for t in self.tiles],
                       boundary={k: v for k, v in bnd.items() if v is not None})

    # ----------------------------------------------------------- tables

    def pair_tables(self):
        n = self.ntiles
        hpen = np.ones((n, n), dtype=np.int64) * 2
        vpen = np.ones((n, n), dtype=np.int64) * 2
        for a, ta in enumerate(self.tiles):
            for b, tb in enumerate(self.tiles):
                if ta.right == tb.left and ta.right != VOID:
                    hpen[a, b] = 0
                if ta.bottom == tb.top and ta.bottom != VOID:
                    vpen[a, b] = 0
        wt2 = np.array([int(2 * Fraction(t.weight)) for t in self.tiles], dtype=np.int64)
        return hpen, vpen, wt2

    def cell_table(self, W, H, allowed=None):
        """(W*H, ntiles) twice-energy additions: boundary markers plus hard
        per-cell label restrictions (``allowed`` maps (i, j) to labels)."""
        n = self.ntiles
        bound2 = np.zeros((W * H, n), dtype=np.int64)

        def restrict(cells, side):
            allowed_set = self.boundary.get(side)
            if allowed_set is None:
                return
            bad = [k for k, lab in enumerate(self.labels) if lab not in allowed_set]
            for cell in cells:
                bound2[cell, bad] += 2

        restrict([c for c in range(W)], "top")
        restrict([(H - 1) * W + c for c in range(W)], "bottom")
        restrict([r * W for r in range(H)], "left")
        restrict([r * W + (W - 1) for r in range(H)], "right")
        if allowed:
            for (i, j), labels in allowed.items():
                if not (0 <= i < W and 0 <= j < H):
                    raise SimforgeError(f"allowed-cell ({i}, {j}) outside the lattice")
                keep = {self.index(lab) for lab in labels}
                cell = (H - 1 - j) * W + i
                for k in range(n):
                    if k not in keep:
                        bound2[cell, k] += _HARD
        return bound2


@dataclass
class TileConfig:
    """One full assignment; ``grid`` is (H, W) tile indices, row 0 on top."""

    tileset: Tileset
    W: int
    H: int
    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int64)
        if self.grid.shape != (self.H, self.W):
            raise SimforgeError("grid dimensions do not match")
        if self.grid.min() < 0 or self.grid.max() >= self.tileset.ntiles:
            raise SimforgeError("grid holds an unknown tile index")

    def label_at(self, i, j):
        """Label at column i, height j (0 = bottom row)."""
        return self.tileset.labels[self.grid[self.H - 1 - j, i]]

    def rows(self):
        """Rows of labels, top row first."""
        return [[self.tileset.labels[k] for k in row] for row in self.grid]

    def dump(self):
        """Character-grid dump (one row per line, labels space-separated)."""
        width = max(len(lab) for lab in self.tileset.labels)
        return "\n".join(" ".join(lab.ljust(width) for lab in row).rstrip()
                         for row in self.rows())


def _twice_energy(ts, cfg, allowed=None):
    hpen, vpen, wt2 = ts.pair_tables()
    bound2 = ts.cell_table(cfg.W, cfg.H, allowed)
    g = cfg.grid
    e = int(wt2[g].sum())
    e += int(bound2[np.arange(cfg.W * cfg.H), g.ravel()].sum())
    if cfg.W > 1:
        e += int(hpen[g[:, :-1], g[:, 1:]].sum())
    if cfg.H > 1:
        e += int(vpen[g[:-1, :], g[1:, :]].sum())
    return e


def tiling_energy(ts, cfg, allowed=None):
    """Exact energy of a configuration as a Fraction (half-integer)."""
    return Fraction(_twice_energy(ts, cfg, allowed), 2)


@dataclass
class GroundResult:
    energy: Fraction
    count: int
    config: TileConfig


EXHAUSTIVE_LIMIT = 10**8
TRANSFER_LIMIT = 5 * 10**5


def ground_exhaustive(ts, W, H, allowed=None):
    """Exact enumeration over all |tiles|^(W*H) assignments."""
    if ts.ntiles ** (W * H) > EXHAUSTIVE_LIMIT:
        raise SimforgeError("instance too large for exhaustive enumeration")
    hpen, vpen, wt2 = ts.pair_tables()
    bound2 = ts.cell_table(W, H, allowed)
    te, count, flat = _kernels.tiling_exhaustive(ts.ntiles, W, H, hpen, vpen, wt2, bound2)
    cfg = TileConfig(ts, W, H, np.asarray(flat).reshape(H, W))
    return GroundResult(Fraction(int(te), 2), int(count), cfg)


def ground_transfer(ts, W, H, allowed=None):
    """Exact row-profile dynamic program (row state space |tiles|^W)."""
    if ts.ntiles**W > TRANSFER_LIMIT:
        raise SimforgeError("row state space too large for the transfer solver")
    hpen, vpen, wt2 = ts.pair_tables()
    bound2 = ts.cell_table(W, H, allowed)
    te, count, rows = _kernels.tiling_transfer(ts.ntiles, W, H, hpen, vpen, wt2, bound2)
    grid = np.zeros((H, W), dtype=np.int64)
    for r in range(H):
        s = int(rows[r])
        for c in range(W):
            grid[r, c] = s % ts.ntiles
            s //= ts.ntiles
    cfg = TileConfig(ts, W, H, grid)
    return GroundResult(Fraction(int(te), 2), int(count), cfg)


# --------------------------------------------------------------- the counter

def binary_counter_tileset(mirrored=False):
    """Seven-tile binary counter.

    Rows below the boundary row hold successive binary increments (least
    significant bit next to the marker column); the corner tile carries a
    -1/2 bonus making the counting configuration the unique ground state.
    ``mirrored=True`` reflects every tile across the main diagonal, turning
    rows into columns (the counter then writes the lattice width).
    """
    tiles = [
        Tile("0", top="0", right="0", bottom="0", left="0"),
        Tile("1", top="1", right="0", bottom="1", left="0"),
        Tile("0c", top="1", right="1", bottom="0", left="1"),
        Tile("1c", top="0", right="0", bottom="1", left="1"),
        Tile("R", top="R", right="1", bottom="R", left=VOID),
        Tile("B", top=VOID, right="B", bottom="0", left="B"),
        Tile("S", top=VOID, right="B", bottom="R", left=VOID, weight=Fraction(-1, 2)),
    ]
    ts = Tileset(tiles)
    return ts.mirrored() if mirrored else ts


def counter_bit(label):
    return 1 if label.startswith("1") else 0


def counter_row_value(cfg, j):
    """Value encoded at height j: bits at columns 1..W-1, LSB at column 1."""
    return sum(counter_bit(cfg.label_at(c, j)) << (c - 1) for c in range(1, cfg.W))


def mirrored_column_value(cfg, i):
    """Value encoded in column i of a mirrored-counter config: bits at
    heights 1..H-1, LSB at height 1."""
    return sum(counter_bit(cfg.label_at(i, j)) << (j - 1) for j in range(1, cfg.H))


def simulate_counter(W, H):
    """Forward rule simulation of the counter ground configuration.

    Independent of the solvers: the top row is the boundary row (corner
    marker then fillers) and every later row is the binary increment of the
    one above, carry entering from the marker column.
    """
    rows = [["S"] + ["B"] * (W - 1)]
    bits = [0] * (W - 1)
    for _ in range(1, H):
        out = ["R"]
        carry = 1
        for b in bits:
            if carry:
                out.append("1c" if b == 0 else "0c")
                carry = b
            else:
                out.append("1" if b else "0")
        bits = [counter_bit(lab) for lab in out[1:]]
        rows.append(out)
    return rows


# ---------------------------------------------------------- marker machinery

# diagonal-scan layer: a stimulus cell on the left edge launches a diagonal
# marching down-right; cells under the diagonal are shaded.  Edge colors:
# w white, y shaded, d diagonal hand-off, c clean scan (no stimulus yet).

def marker_tileset():
    tiles = [
        Tile("W", top="w", right="w", bottom="w", left="w"),
        Tile("Y", top="y", right="y", bottom="y", left="y"),
        Tile("D", top="d", right="d", bottom="y", left="y"),
        Tile("X", top="w", right="w", bottom="d", left="d"),
        Tile("Wc", top="c", right="w", bottom="c", left=VOID),
        Tile("Ds", top="c", right="d", bottom="y", left=VOID),
        Tile("Yl", top="y", right="y", bottom="y", left=VOID),
    ]
    return Tileset(tiles, boundary={"top": {"W", "Wc", "X", "Ds"},
                                    "left": {"Wc", "Ds", "Yl"}})


MARKER_SHADED = {"Y", "D", "Ds", "Yl"}


def stimulus_allowed(heights_with_one, H, *, lowest_zero=False):
    """Left-column allowed-label table driving the scan layer.

    ``heights_with_one``: heights (1-based from the bottom boundary row)
    whose driver bit is 1.  The default keys the diagonal on the highest
    1-bit (no stimulus means no diagonal); ``lowest_zero=True`` keys it on
    the lowest 0-bit above the bottom row (the corner cell is then always
    shaded, so an empty run launches the diagonal at height 1).
    """
    ones = set(heights_with_one)
    table = {(0, 0): ({"Yl"} if lowest_zero else {"Yl", "Wc"})}
    for j in range(1, H):
        if lowest_zero:
            table[(0, j)] = {"Yl", "Wc"} if j in ones else {"Ds", "Wc"}
        else:
            table[(0, j)] = {"Ds", "Yl"} if j in ones else {"Wc", "Yl"}
    return table


def marker_region(cfg):
    """Cells (i, j) shaded by a scan-layer configuration."""
    out = set()
    for i in range(cfg.W):
        for j in range(cfg.H):
            if cfg.label_at(i, j) in MARKER_SHADED:
                out.add((i, j))
    return out


def square_flag_tileset():
    """Band-intersection layer: horizontal edges carry the row band,
    vertical edges the column band; label 'ii' marks the square."""
    tiles = []
    for rb in "io":
        for cb in "io":
            tiles.append(Tile(rb + cb, top="c" + cb, right="r" + rb,
                              bottom="c" + cb, left="r" + rb))
    return Tileset(tiles)


def band_allowed(scan_cfg):
    """Square-layer per-cell restrictions derived from a scan layer:
    the left column pins row bands (strictly below the stimulus), the
    bottom row pins column bands (strictly left of the diagonal foot)."""
    table = {}
    H, W = scan_cfg.H, scan_cfg.W
    for j in range(H):
        lab = scan_cfg.label_at(0, j)
        rb = "i" if lab == "Yl" else "o"
        table[(0, j)] = {rb + "i", rb + "o"}
    for i in range(W):
        lab = scan_cfg.label_at(i, 0)
        cb = "i" if lab in ("Y", "Yl") else "o"
        prev = table.get((i, 0), {t.label for t in square_flag_tileset().tiles})
        table[(i, 0)] = {lab2 for lab2 in prev if lab2[1] == cb}
    return table


def square_region(cfg):
    return {(i, j) for i in range(cfg.W) for j in range(cfg.H)
            if cfg.label_at(i, j) == "ii"}


# ------------------------------------------------------------- layer stacks

@dataclass
class LayerStack:
    """Ground configurations of the five stacked layers of one lattice."""

    W: int
    H: int
    counter: TileConfig          # writes the height along the bottom row
    mirror: TileConfig           # writes the width along the left column
    triangle: TileConfig         # diagonal keyed on the width's highest 1-bit
    square_scan: TileConfig      # diagonal keyed on the width's lowest 0-bit
    square: TileConfig           # band intersection layer

    def layers(self):
        return {"counter": self.counter, "mirror": self.mirror,
                "triangle": self.triangle, "square_scan": self.square_scan,
                "square": self.square}


def solve_stack(W, H, solver=ground_transfer):
    """Solve the five layers bottom-up, each conditioned on the previous.

    Every layer's conditional ground must be unique and (for the penalty-only
    marker layers) of energy zero; both are asserted, which is what makes
    conditional solving equal to solving the joint stacked model.
    """
    counter = solver(binary_counter_tileset(), W, H)
    mirror = solver(binary_counter_tileset(mirrored=True), W, H)
    if counter.count != 1 or mirror.count != 1:
        raise SimforgeError("counter layer ground state is not unique")
    ones = [j for j in range(1, H)
            if counter_bit(mirror.config.label_at(0, j))]
    ts = marker_tileset()
    tri = solver(ts, W, H, allowed=stimulus_allowed(ones, H))
    sq_scan = solver(ts, W, H, allowed=stimulus_allowed(ones, H, lowest_zero=True))
    for res, name in ((tri, "triangle"), (sq_scan, "square scan")):
        if res.count != 1 or res.energy != 0:
            raise SimforgeError(f"{name} layer did not ground uniquely at zero energy")
    square = solver(square_flag_tileset(), W, H, allowed=band_allowed(sq_scan.config))
    if square.count != 1 or square.energy != 0:
        raise SimforgeError("square layer did not ground uniquely at zero energy")
    return LayerStack(W, H, counter.config, mirror.config, tri.config,
                      sq_scan.config, square.config)


@dataclass
class DecodedLayers:
    height_value: int
    width_value: int
    H: int
    W: int
    n: int
    b: int
    triangle_side: int
    square_side: int
    triangle_cells: set
    square_cells: set


def decode_layers(stack):
    """Read the encoded sizes and marked regions off a solved stack.

    Frozen conventions: the bottom counter row encodes H - 1 (the boundary
    row holds value 0), the left mirrored column encodes W - 1; a width of
    the form 2^n + 2^b therefore shows 1-bits at heights 1..n and b+1, the
    triangle diagonal starts at height b+1 and the square has side n+1.
    """
    hv = counter_row_value(stack.counter, 0)
    wv = mirrored_column_value(stack.mirror, 0)
    H = hv + 1
    W = wv + 1
    if H != stack.H or W != stack.W:
        raise SimforgeError(
            f"decoded sizes ({W}, {H}) disagree with the lattice ({stack.W}, {stack.H})")
    bits = [k for k in range(W.bit_length()) if (W >> k) & 1]
    if len(bits) != 2:
        raise SimforgeError(f"width {W} is not a two-power sum 2^n + 2^b")
    n, b = bits
    tri_cells = marker_region(stack.triangle)
    sq_cells = square_region(stack.square)
    tri_side = max((i + j for i, j in tri_cells), default=-1)
    sq_side = max((i + 1 for i, _ in sq_cells), default=0)
    want_tri = {(i, j) for i in range(stack.W) for j in range(stack.H) if i + j <= b + 1}
    want_sq = {(i, j) for i in range(n + 1) for j in range(n + 1)}
    if tri_cells != want_tri or sq_cells != want_sq:
        raise SimforgeError("marker regions disagree with the decoded sizes")
    return DecodedLayers(hv, wv, H, W, n, b, tri_side, sq_side, tri_cells, sq_cells)
