import numpy as np
import pytest

from relaxmm.identify import default_parameters
from relaxmm.mesh import UnitCellSpec, build_structured_quad_grid, build_unit_cell_mesh

# lines recorded by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return default_parameters()


@pytest.fixture(scope="session")
def cell_r2():
    return build_unit_cell_mesh(UnitCellSpec(refinement=2))


@pytest.fixture
def distorted_grid():
    """3 x 2 quad9 grid with interior nodes moved and mid nodes kept straight."""
    g = build_structured_quad_grid(3.0, 2.0, 3, 2)
    X = g.nodes.copy()
    rng = np.random.default_rng(3)
    corner = np.zeros(len(X), bool)
    corner[np.unique(g.cells[:, :4])] = True
    inner = corner & (X[:, 0] > 0) & (X[:, 0] < 3) & (X[:, 1] > 0) & (X[:, 1] < 2)
    X[inner] += rng.uniform(-0.2, 0.2, (inner.sum(), 2))
    c = g.cells
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 3), (3, 0)]):
        X[c[:, 4 + k]] = (X[c[:, a]] + X[c[:, b]]) / 2
    X[c[:, 8]] = X[c[:, :4]].mean(axis=1)
    from relaxmm.mesh import Mesh2D

    return Mesh2D(X, c.copy(), "quad9", g.material_id.copy(), {k: v.copy() for k, v in g.boundary.items()})
