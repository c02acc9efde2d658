"""Deterministic meshes: structured quad9 grids, tri6 unit cells with a
circular inclusion, tiled beams and periodic node pairing.

Unit cells are assembled from eight copies of one structured octant (the
triangle between the cell centre, the midpoint of the right side and the
upper-right corner).  Each octant holds a triangular core, an annulus layer
up to the polygonal inclusion boundary and a matrix layer out to the cell
side.  Copies are produced by the symmetries of the square, which makes every
cell mirror-symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .elements import QUAD_EDGES, TRI_EDGES, element_map, q2_shape, t2_shape, gauss_quad, gauss_triangle_7

VTK_TYPES = {"quad9": 28, "tri6": 22, "line3": 21}
MATRIX, INCLUSION = 0, 1


@dataclass(frozen=True)
class UnitCellSpec:
    l: float = 1.9e-2
    d: float = 1.2e-2
    variant: int = 1
    refinement: int = 4

    def __post_init__(self):
        if not (0 < self.d < self.l):
            raise ValueError(f"degenerate cell geometry: need 0 < d < l, got d={self.d}, l={self.l}")
        if self.variant not in (1, 2, 3, 4):
            raise ValueError(f"unknown unit-cell variant {self.variant}")
        if self.refinement < 1:
            raise ValueError("refinement must be >= 1")


@dataclass(frozen=True)
class PeriodicPairs:
    master: np.ndarray
    slave: np.ndarray
    offset: np.ndarray  # (m, 2)

    def __len__(self):
        return len(self.master)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Single-block mesh of quad9 or tri6 cells.

    ``boundary`` maps tag names to line3 connectivity (end, end, mid).
    """

    nodes: np.ndarray
    cells: np.ndarray
    kind: str
    material_id: np.ndarray
    boundary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("quad9", "tri6"):
            raise ValueError(f"unsupported element kind {self.kind!r}")
        nb = 9 if self.kind == "quad9" else 6
        if self.cells.ndim != 2 or self.cells.shape[1] != nb:
            raise ValueError(f"{self.kind} cells need {nb} nodes each")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.nodes)):
            raise ValueError("connectivity index out of range")
        if len(self.material_id) != len(self.cells):
            raise ValueError("one material id per cell required")
        for arr in (self.nodes, self.cells, self.material_id):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def local_edges(self) -> np.ndarray:
        """(n_local_edges, 3) local node indices (end, end, mid) per edge."""
        if self.kind == "quad9":
            return np.column_stack([QUAD_EDGES, 4 + np.arange(4)])
        return np.column_stack([TRI_EDGES, 3 + np.arange(3)])

    @cached_property
    def edge_table(self):
        """Unique edges (lo, hi, mid) with lo < hi, and the cell-to-edge map."""
        le = self.local_edges
        ends = self.cells[:, le[:, :2]]  # (E, ne, 2)
        lo = ends.min(axis=2).ravel()
        hi = ends.max(axis=2).ravel()
        mid = self.cells[:, le[:, 2]].ravel()
        key = lo.astype(np.int64) * self.n_nodes + hi
        uniq, first, inv = np.unique(key, return_index=True, return_inverse=True)
        edges = np.column_stack([lo[first], hi[first], mid[first]])
        return edges, inv.reshape(len(self.cells), len(le))

    @property
    def edges(self) -> np.ndarray:
        return self.edge_table[0]

    @property
    def cell_edges(self) -> np.ndarray:
        return self.edge_table[1]

    @cached_property
    def edge_cell_count(self) -> np.ndarray:
        return np.bincount(self.cell_edges.ravel(), minlength=len(self.edges))

    def boundary_edges(self) -> np.ndarray:
        """Line3 connectivity of all edges that belong to a single cell."""
        return self.edges[self.edge_cell_count == 1]

    def boundary_nodes(self, tag: str) -> np.ndarray:
        return np.unique(self.boundary[tag])

    def cell_areas(self) -> np.ndarray:
        if self.kind == "quad9":
            rule, ev = gauss_quad(3), q2_shape(gauss_quad(3).points)
        else:
            rule, ev = gauss_triangle_7(), t2_shape(gauss_triangle_7().points)
        emap = element_map(self.nodes[self.cells], ev.gradients)
        return emap.det @ rule.weights

    def min_jacobian(self) -> float:
        pts = gauss_quad(3).points if self.kind == "quad9" else gauss_triangle_7().points
        ev = q2_shape(pts) if self.kind == "quad9" else t2_shape(pts)
        return float(element_map(self.nodes[self.cells], ev.gradients).det.min())

    def bbox(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    def translated(self, shift) -> "Mesh2D":
        return Mesh2D(self.nodes + np.asarray(shift, float), self.cells.copy(), self.kind,
                      self.material_id.copy(), {k: v.copy() for k, v in self.boundary.items()})


# -- structured grid ----------------------------------------------------------


def graded_breaks(length, n, ratio=1.0):
    """n element lengths growing geometrically from both ends toward the middle.

    ``ratio`` is the largest over the smallest element length.
    """
    if ratio < 1:
        raise ValueError("grading ratio must be >= 1")
    half = np.arange((n + 1) // 2)
    g = ratio ** (1.0 / max(len(half) - 1, 1))
    h = g**half
    h = np.concatenate([h, h[: n // 2][::-1]])
    return np.concatenate([[0.0], np.cumsum(h)]) * (length / h.sum())


def build_structured_quad_grid(width, height, nx, ny, origin=(0.0, 0.0), y_grading=1.0) -> Mesh2D:
    """Rectangular quad9 grid with tags left/right/bottom/top.

    ``y_grading`` > 1 refines the rows toward the top and bottom edges.
    """
    if width <= 0 or height <= 0:
        raise ValueError("grid dimensions must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    mx, my = 2 * nx + 1, 2 * ny + 1
    xs = origin[0] + np.linspace(0.0, width, mx)
    yb = graded_breaks(height, ny, y_grading)
    ys = np.empty(my)
    ys[::2], ys[1::2] = yb, (yb[:-1] + yb[1:]) / 2
    ys += origin[1]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    nid = np.arange(mx * my).reshape(mx, my)
    i, j = np.meshgrid(2 * np.arange(nx), 2 * np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    cells = np.column_stack(
        [
            nid[i, j], nid[i + 2, j], nid[i + 2, j + 2], nid[i, j + 2],
            nid[i + 1, j], nid[i + 2, j + 1], nid[i + 1, j + 2], nid[i, j + 1],
            nid[i + 1, j + 1],
        ]
    )
    mesh = Mesh2D(nodes, cells, "quad9", np.zeros(len(cells), dtype=int))
    return _tag_rectangle(mesh)


# -- unit cells ---------------------------------------------------------------


def _octant_mesh(h, r, k):
    """Corner points and triangles of the fundamental octant.

    Returns (points, triangles, inside_flags) with straight-sided linear
    triangles; quadratic mid nodes are added later.
    """
    c = 0.5 * r
    n1 = max(1, int(np.ceil(0.6 * k)))
    n2 = k
    pts, tris, mats = [], [], []

    def add(p):
        pts.append(p)
        return len(pts) - 1

    # triangular core: p(i, j) = (c i/k, c j/k), 0 <= j <= i <= k
    core = {}
    for i in range(k + 1):
        for j in range(i + 1):
            core[i, j] = add((c * i / k, c * j / k))
    for i in range(k):
        for j in range(i + 1):
            tris.append((core[i, j], core[i + 1, j], core[i + 1, j + 1]))
            mats.append(INCLUSION)
            if j < i:
                tris.append((core[i, j], core[i + 1, j + 1], core[i, j + 1]))
                mats.append(INCLUSION)

    theta = np.pi / 4 * np.arange(k + 1) / k
    arc = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    inner = np.column_stack([np.full(k + 1, c), c * np.arange(k + 1) / k])
    side = np.column_stack([np.full(k + 1, h), h * np.arange(k + 1) / k])

    def ring(a_ids, b_pts, a_pts, layers, mat):
        rows = [a_ids]
        for t in range(1, layers + 1):
            frac = t / layers
            rows.append([add(tuple(a_pts[j] + frac * (b_pts[j] - a_pts[j]))) for j in range(k + 1)])
        for t in range(layers):
            lo, up = rows[t], rows[t + 1]
            for j in range(k):
                q = (lo[j], up[j], up[j + 1], lo[j + 1])
                p = np.array([pts[v] for v in q])
                # split along the shorter diagonal
                if np.linalg.norm(p[0] - p[2]) <= np.linalg.norm(p[1] - p[3]):
                    tris.extend([(q[0], q[1], q[2]), (q[0], q[2], q[3])])
                else:
                    tris.extend([(q[0], q[1], q[3]), (q[1], q[2], q[3])])
                mats.extend([mat, mat])
        return rows[-1]

    inner_ids = [core[k, j] for j in range(k + 1)]
    arc_ids = ring(inner_ids, arc, inner, n1, INCLUSION)
    ring(arc_ids, side, arc, n2, MATRIX)
    tri = np.array(tris)
    P = np.array(pts)
    # orient counter-clockwise
    a, b, cc = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (cc[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (cc[:, 0] - a[:, 0])
    flip = cross < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return P, tri, np.array(mats)


def _square_symmetry(i):
    """Linear map taking the fundamental octant to octant i (angles 45i..45(i+1))."""
    rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])  # reflection about the diagonal
    base = rot(np.pi / 2 * (i // 2))
    m = base @ swap if i % 2 else base
    return np.round(m)


def _tri6_from_linear(P, tri):
    """Add straight-sided mid nodes: (corners..., mid01, mid12, mid20)."""
    mids = np.concatenate([(P[tri[:, a]] + P[tri[:, b]]) / 2 for a, b in TRI_EDGES])
    n = len(tri)
    nodes = np.vstack([P, mids])
    base = len(P)
    cells = np.column_stack([tri, base + np.arange(n), base + n + np.arange(n), base + 2 * n + np.arange(n)])
    return nodes, cells


def _merge(nodes, cells, tol):
    """Merge coincident nodes and renumber in order of first appearance."""
    tree = cKDTree(nodes)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    n = len(nodes)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(g, directed=False)
    # representative: lowest original index in each component
    rep = np.full(labels.max() + 1, n)
    np.minimum.at(rep, labels, np.arange(n))
    used = np.unique(rep[labels[cells.ravel()]])
    new_id = np.full(n + 1, -1)
    new_id[used] = np.arange(len(used))
    return nodes[used], new_id[rep[labels[cells]]]


def _octant_pieces(h, r, k, placements):
    """Collect tri6 pieces. placements: iterable of (centre, octant list)."""
    P, tri, mats = _octant_mesh(h, r, k)
    all_nodes, all_cells, all_mats, off = [], [], [], 0
    for centre, octs in placements:
        for i in octs:
            m = _square_symmetry(i)
            Q = P @ m.T + np.asarray(centre, float)
            t = tri.copy()
            if np.linalg.det(m) < 0:
                t = t[:, [0, 2, 1]]
            nodes, cells = _tri6_from_linear(Q, t)
            all_nodes.append(nodes)
            all_cells.append(cells + off)
            all_mats.append(mats)
            off += len(nodes)
    return np.vstack(all_nodes), np.vstack(all_cells), np.concatenate(all_mats)


def build_unit_cell_mesh(spec: UnitCellSpec) -> Mesh2D:
    """Tri6 mesh of one unit cell (variants 1-4).

    Variants 1 and 2 are l x l squares centred at the origin with the
    inclusion at the centre or split into four corner quarters.  Variants 3
    and 4 are 45-degree rotated squares of edge sqrt(2) l centred at the
    origin, the first with a central inclusion plus four corner quarters, the
    second with four half inclusions at the edge midpoints.
    """
    l, r = spec.l, spec.d / 2
    h = l / 2
    k = 2 * spec.refinement
    all8 = range(8)
    if spec.variant == 1:
        placements, shift = [((0, 0), all8)], (0, 0)
    elif spec.variant == 2:
        placements = [((0, 0), (0, 1)), ((l, 0), (2, 3)), ((l, l), (4, 5)), ((0, l), (6, 7))]
        shift = (-h, -h)
    elif spec.variant == 3:
        placements = [((0, 0), all8), ((l, 0), (3, 4)), ((0, l), (5, 6)), ((-l, 0), (7, 0)), ((0, -l), (1, 2))]
        shift = (0, 0)
    else:
        placements = [((0, 0), (7, 0, 1, 2)), ((l, 0), (1, 2, 3, 4)), ((0, l), (5, 6, 7, 0)), ((l, l), (3, 4, 5, 6))]
        shift = (-h, -h)
    nodes, cells, mats = _octant_pieces(h, r, k, placements)
    nodes, cells = _merge(nodes + np.asarray(shift, float), cells, 1e-10 * l)
    nodes = _snap(nodes, l)
    mesh = Mesh2D(nodes, cells, "tri6", mats)
    if spec.variant in (1, 2):
        return _tag_rectangle(mesh)
    return _tag_all(mesh)


def _snap(nodes, l):
    """Remove round-off so mirrored boundary nodes match exactly."""
    scale = 1e-13 * l
    return np.round(nodes / scale) * scale


def build_beam_mesh(n: int, spec: UnitCellSpec | None = None) -> Mesh2D:
    """Tiling of 12 n x n cells on [0, 12 n l] x [-n l / 2, n l / 2]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = spec or UnitCellSpec(refinement=2)
    return build_cell_cluster(spec, 12 * n, n, origin=(0.0, -n * spec.l / 2))


def build_cell_cluster(spec: UnitCellSpec, nx: int, ny: int, origin=None) -> Mesh2D:
    """nx x ny tiling of l x l cells (variants 1 and 2); centred at the origin by default."""
    if spec.variant not in (1, 2):
        raise ValueError(f"variant {spec.variant} cells do not tile an l x l lattice")
    l = spec.l
    cell = build_unit_cell_mesh(spec)
    if origin is None:
        origin = (-nx * l / 2, -ny * l / 2)
    ox, oy = origin
    shifts = [(ox + (i + 0.5) * l, oy + (j + 0.5) * l) for i in range(nx) for j in range(ny)]
    nn = cell.n_nodes
    nodes = np.vstack([cell.nodes + s for s in shifts])
    cells = np.vstack([cell.cells + q * nn for q in range(len(shifts))])
    mats = np.tile(cell.material_id, len(shifts))
    nodes, cells = _merge(nodes, cells, 1e-10 * l)
    return _tag_rectangle(Mesh2D(_snap(nodes, l), cells, "tri6", mats))


# -- boundary tagging ---------------------------------------------------------


def _tag_all(mesh: Mesh2D) -> Mesh2D:
    return Mesh2D(mesh.nodes, mesh.cells, mesh.kind, mesh.material_id, {"boundary": mesh.boundary_edges()})


def _tag_rectangle(mesh: Mesh2D) -> Mesh2D:
    be = mesh.boundary_edges()
    (x0, y0), (x1, y1) = mesh.bbox()
    tol = 1e-9 * max(x1 - x0, y1 - y0)
    xy = mesh.nodes[be[:, :2]]  # (m, 2 ends, 2)
    tags = {"boundary": be}
    for name, axis, val in (("left", 0, x0), ("right", 0, x1), ("bottom", 1, y0), ("top", 1, y1)):
        sel = np.all(np.abs(xy[:, :, axis] - val) < tol, axis=1)
        tags[name] = be[sel]
    return Mesh2D(mesh.nodes, mesh.cells, mesh.kind, mesh.material_id, tags)


# -- periodicity --------------------------------------------------------------


def build_periodic_pairs(mesh: Mesh2D) -> PeriodicPairs:
    """Pair left/right and bottom/top boundary nodes of a rectangular mesh.

    The bottom-left corner is the master of the other three corners.
    """
    (x0, y0), (x1, y1) = mesh.bbox()
    W, H = x1 - x0, y1 - y0
    tol = 1e-10 * max(W, H)
    bn = np.unique(mesh.boundary["boundary"])
    X = mesh.nodes
    on = lambda idx, axis, v: idx[np.abs(X[idx, axis] - v) < tol]
    left, right = on(bn, 0, x0), on(bn, 0, x1)
    bottom, top = on(bn, 1, y0), on(bn, 1, y1)
    if len(left) + len(right) + len(bottom) + len(top) == 0 or not np.all(
        np.isin(bn, np.concatenate([left, right, bottom, top]))
    ):
        raise ValueError("mesh boundary is not an axis-aligned rectangle")
    corners = {
        (a, b): np.flatnonzero((np.abs(X[:, 0] - a) < tol) & (np.abs(X[:, 1] - b) < tol))
        for a in (x0, x1)
        for b in (y0, y1)
    }
    for key, ids in corners.items():
        if len(ids) != 1:
            raise ValueError(f"corner {key} missing from mesh")
    bl = corners[x0, y0][0]
    corner_set = {int(v[0]) for v in corners.values()}

    masters, slaves, offsets = [], [], []

    def match(src, dst, off):
        tree = cKDTree(X[dst])
        dist, j = tree.query(X[src] + off)
        for s, dd, jj in zip(src, dist, j):
            if dd > tol:
                raise ValueError(f"boundary node {int(s)} at {X[s].tolist()} has no periodic partner")
        src_set = set(map(int, src))
        for t in dst:
            if int(t) not in src_set and np.min(np.linalg.norm(X[src] + off - X[t], axis=1)) > tol:
                raise ValueError(f"boundary node {int(t)} at {X[t].tolist()} has no periodic partner")
        return dst[j]

    for src, dst, off in ((left, right, np.array([W, 0.0])), (bottom, top, np.array([0.0, H]))):
        partner = match(src, dst, off)
        for s, t in zip(src, partner):
            if int(s) in corner_set or int(t) in corner_set:
                continue
            masters.append(int(s))
            slaves.append(int(t))
            offsets.append(off)
    for (a, b), ids in corners.items():
        if ids[0] != bl:
            masters.append(int(bl))
            slaves.append(int(ids[0]))
            offsets.append(np.array([a - x0, b - y0]))
    return PeriodicPairs(np.array(masters), np.array(slaves), np.array(offsets).reshape(-1, 2))


# -- export -------------------------------------------------------------------


def write_vtk(mesh: Mesh2D, path, point_data=None, cell_data=None, title="relaxmm mesh"):
    """Write a legacy ASCII VTK unstructured grid.

    ``point_data``/``cell_data`` map names to arrays of shape (n,) (scalars)
    or (n, 2)/(n, 3) (vectors, padded to 3 components).
    """
    path = Path(path)
    nb = mesh.cells.shape[1]
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (nb + 1)}")
    lines += [" ".join(map(str, [nb, *c])) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(VTK_TYPES[mesh.kind])] * mesh.n_cells
    cell_data = {"material_id": mesh.material_id, **(cell_data or {})}
    for header, n, data in (("POINT_DATA", mesh.n_nodes, point_data), ("CELL_DATA", mesh.n_cells, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                kind = "int" if np.issubdtype(arr.dtype, np.integer) else "double"
                lines += [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
                lines += [f"{v:.10g}" if kind == "double" else str(v) for v in arr]
            else:
                vec = np.zeros((len(arr), 3))
                vec[:, : arr.shape[1]] = arr
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.10g} {b:.10g} {c:.10g}" for a, b, c in vec]
    path.write_text("\n".join(lines) + "\n")
    return path
