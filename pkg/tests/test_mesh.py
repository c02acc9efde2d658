import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from relaxmm.mesh import (
    INCLUSION,
    Mesh2D,
    UnitCellSpec,
    build_beam_mesh,
    build_cell_cluster,
    build_periodic_pairs,
    build_structured_quad_grid,
    build_unit_cell_mesh,
    graded_breaks,
    write_vtk,
)

L = 1.9e-2


def test_structured_grid_counts_and_tags():
    g = build_structured_quad_grid(4.0, 1.0, 4, 2, origin=(1.0, -0.5))
    assert g.n_cells == 8 and g.n_nodes == 9 * 5
    assert_allclose(g.cell_areas().sum(), 4.0)
    for tag, n in (("left", 2), ("right", 2), ("bottom", 4), ("top", 4), ("boundary", 12)):
        assert len(g.boundary[tag]) == n
    assert_allclose(g.nodes[g.boundary_nodes("left"), 0], 1.0)
    assert_allclose(g.nodes[g.boundary_nodes("top"), 1], 0.5)
    assert len(g.boundary_edges()) == 12


def test_edge_table_is_consistent():
    g = build_structured_quad_grid(2.0, 2.0, 3, 3)
    assert len(g.edges) == 2 * 3 * 4
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    counts = np.bincount(g.edge_cell_count)
    assert counts[1] == 12 and counts[2] == 12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.floats(1.0, 500.0), st.floats(0.1, 10.0))
def test_graded_breaks(n, ratio, length):
    b = graded_breaks(length, n, ratio)
    h = np.diff(b)
    assert len(b) == n + 1
    assert_allclose(b[[0, -1]], [0, length], rtol=1e-12)
    assert np.all(h > 0)
    assert_allclose(h, h[::-1], rtol=1e-10)
    if n >= 3:
        assert_allclose(h.max() / h.min(), ratio, rtol=1e-9)


def test_graded_grid_keeps_mid_nodes_centred():
    g = build_structured_quad_grid(1.0, 1.0, 2, 6, y_grading=20)
    X = g.nodes[g.cells]
    assert_allclose(X[:, 7], (X[:, 0] + X[:, 3]) / 2, atol=1e-15)
    assert_allclose(g.cell_areas().sum(), 1.0)


def test_mesh_is_read_only():
    g = build_structured_quad_grid(1.0, 1.0, 1, 1)
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 3.0


@pytest.mark.parametrize(
    "kw,msg",
    [(dict(d=0.02), "degenerate"), (dict(variant=5), "variant"), (dict(refinement=0), "refinement")],
)
def test_unit_cell_spec_validation(kw, msg):
    with pytest.raises(ValueError, match=msg):
        UnitCellSpec(**kw)


def test_invalid_connectivity_rejected():
    with pytest.raises(ValueError, match="out of range"):
        Mesh2D(np.zeros((3, 2)), np.arange(6)[None], "tri6", np.zeros(1, int))


@pytest.mark.parametrize("variant,area", [(1, L * L), (2, L * L), (3, 2 * L * L), (4, 2 * L * L)])
def test_unit_cell_geometry(variant, area):
    spec = UnitCellSpec(variant=variant, refinement=2)
    m = build_unit_cell_mesh(spec)
    assert m.kind == "tri6"
    assert m.min_jacobian() > 0
    a = m.cell_areas()
    assert_allclose(a.sum(), area, rtol=1e-12)
    # inclusions: one full disc per l x l of lattice, polygonal so slightly smaller
    frac = a[m.material_id == INCLUSION].sum() / area
    disc = np.pi * (spec.d / 2) ** 2 / L**2
    assert disc * 0.97 < frac <= disc
    # straight-sided quadratic triangles: mid nodes at edge midpoints
    X = m.nodes[m.cells]
    assert_allclose(X[:, 3], (X[:, 0] + X[:, 1]) / 2, atol=1e-15)


def test_unit_cell_has_no_duplicate_nodes(cell_r2):
    from scipy.spatial import cKDTree

    assert not cKDTree(cell_r2.nodes).query_pairs(1e-9 * L)
    # every edge is shared by at most two cells and the boundary is closed
    assert cell_r2.edge_cell_count.max() == 2
    assert_allclose(np.bincount(cell_r2.boundary_edges()[:, :2].ravel()).max(), 2)


def test_refinement_increases_resolution():
    n = [build_unit_cell_mesh(UnitCellSpec(refinement=r)).n_cells for r in (1, 2, 3)]
    assert n[0] < n[1] < n[2]


def test_periodic_pairs_match(cell_r2):
    pairs = build_periodic_pairs(cell_r2)
    X = cell_r2.nodes
    assert_allclose(X[pairs.slave], X[pairs.master] + pairs.offset, atol=1e-12)
    assert len(set(pairs.slave.tolist())) == len(pairs)
    assert not set(pairs.slave.tolist()) & set(pairs.master.tolist())


def test_periodic_pairs_reject_unmatched_node():
    g = build_structured_quad_grid(1.0, 1.0, 2, 2)
    X = g.nodes.copy()
    top_mid = g.boundary_nodes("top")[1]
    X[top_mid, 0] += 0.05
    moved = Mesh2D(X, g.cells.copy(), g.kind, g.material_id.copy(), dict(g.boundary))
    with pytest.raises(ValueError, match="periodic partner"):
        build_periodic_pairs(moved)


def test_cluster_and_beam_dimensions():
    spec = UnitCellSpec(refinement=1)
    c = build_cell_cluster(spec, 2, 3)
    (x0, y0), (x1, y1) = c.bbox()
    assert_allclose([x0, x1, y0, y1], [-L, L, -1.5 * L, 1.5 * L], atol=1e-15)
    cell = build_unit_cell_mesh(spec)
    assert c.n_cells == 6 * cell.n_cells
    assert_allclose(c.cell_areas().sum(), 6 * L * L, rtol=1e-12)
    b = build_beam_mesh(1, spec)
    (x0, y0), (x1, y1) = b.bbox()
    assert_allclose([x0, x1, y0, y1], [0, 12 * L, -L / 2, L / 2], atol=1e-15)
    assert b.n_nodes < 12 * cell.n_nodes


def test_cluster_rejects_non_square_variants():
    with pytest.raises(ValueError, match="tile"):
        build_cell_cluster(UnitCellSpec(variant=3, refinement=1), 2, 2)


def test_write_vtk(tmp_path, cell_r2):
    path = write_vtk(cell_r2, tmp_path / "m.vtk", point_data={"u": np.zeros((cell_r2.n_nodes, 2))},
                     cell_data={"s": np.arange(cell_r2.n_cells, dtype=float)})
    text = path.read_text().split("\n")
    assert text[0].startswith("# vtk DataFile")
    assert f"POINTS {cell_r2.n_nodes} double" in text
    types = text.index(f"CELL_TYPES {cell_r2.n_cells}")
    assert set(text[types + 1 : types + 1 + cell_r2.n_cells]) == {"22"}
    assert any(t.startswith("SCALARS material_id") for t in text)
    assert any(t.startswith("VECTORS u") for t in text)
