import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from relaxmm.identify import (
    CANDIDATES,
    CELL_D,
    CELL_L,
    DEFAULT_C_MACRO,
    IdentifiedParams,
    apparent_affine,
    beta_bending,
    build_candidates,
    default_parameters,
    homogenize_macro,
    identify,
    second_moment_y,
)
from relaxmm.materials import CubicParams, cubic_dominates, lowner_sup_cubic, reuss_ce
from relaxmm.mesh import UnitCellSpec, build_cell_cluster, build_structured_quad_grid


@pytest.fixture(scope="module")
def small():
    return identify(2, (1, 2), (1, 2))


def test_macro_tensor_is_close_to_reference(small):
    assert_allclose(small.C_macro.gpa(), DEFAULT_C_MACRO.gpa(), rtol=0.01)
    assert small.residuals["macro"] < 1e-10


def test_apparent_tensors_dominate_macro(small):
    for c in small.apparent.values():
        assert cubic_dominates(c, small.C_macro)
    lw = lowner_sup_cubic(small.apparent.values())
    for c in small.apparent.values():
        assert cubic_dominates(lw, c)


def test_beta_decreases_towards_one(small):
    b = small.beta_sequence
    assert b[0] > b[1] > 1.0
    assert small.beta == b[0]


def test_homogeneous_cell_reproduces_phase(cell_r2):
    iso = CubicParams.from_gpa(30.0, 12.0, 12.0)
    mats = [iso.voigt(), iso.voigt()]
    for res in (homogenize_macro(cell_r2, mats), apparent_affine(cell_r2, mats)):
        assert_allclose(res.params.gpa(), iso.gpa(), rtol=1e-10)


def test_beta_is_one_for_homogeneous_cluster():
    c = DEFAULT_C_MACRO
    cl = build_cell_cluster(UnitCellSpec(CELL_L, CELL_D, 1, 1), 2, 2)
    assert_allclose(beta_bending(cl, c, 3.0, [c.voigt(), c.voigt()]), 1.0, rtol=1e-10)


def test_second_moment():
    mesh = build_structured_quad_grid(3.0, 2.0, 3, 4, origin=(0, -1))
    assert_allclose(second_moment_y(mesh), 3.0 * 2.0**3 / 12, rtol=1e-14)


def test_candidates_are_admissible():
    p = default_parameters()
    assert set(p.C_micro) == set(CANDIDATES)
    assert_allclose(p.alpha, 1.66, atol=0.005)
    for name, cm in p.C_micro.items():
        assert cubic_dominates(cm, p.C_macro)
        assert_allclose(p.C_e[name].matrix, reuss_ce(cm, p.C_macro).matrix)
    assert_allclose(p.C_micro["beta-scaled"].gpa(), 1.75 * p.C_macro.gpa())
    with pytest.raises(ValueError, match="not stiffer"):
        build_candidates(p.C_macro, p.C_macro, 1.0)


def test_report_round_trip(small, tmp_path):
    path = small.save(tmp_path / "r.json")
    data = json.loads(path.read_text())
    assert data["units"] == "GPa"
    back = IdentifiedParams.load(path)
    assert_allclose(back.C_macro.gpa(), small.C_macro.gpa(), rtol=1e-15)
    assert back.beta_sequence == small.beta_sequence
    for k in CANDIDATES:
        assert_allclose(back.C_e[k].matrix, small.C_e[k].matrix, rtol=1e-12)
