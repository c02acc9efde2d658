import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from relaxmm.elements import (
    Q2_NODES,
    QUAD_CORNERS,
    QUAD_EDGES,
    T2_NODES,
    edge_signs,
    edge_trace_basis,
    element_map,
    gauss_1d,
    gauss_quad,
    gauss_triangle_7,
    line3_shape,
    map_covariant,
    nq2_functionals,
    nq2_interpolate,
    nq2_shape,
    q2_shape,
    t2_shape,
)

coef = st.floats(-2, 2, allow_nan=False)


def test_gauss_quad_integrates_degree_five_per_direction():
    r = gauss_quad(3)
    x, y = r.points.T
    assert_allclose(r.weights @ (x**4 * y**2), (2 / 5) * (2 / 3), rtol=1e-14)
    assert_allclose(r.weights.sum(), 4.0)


@pytest.mark.parametrize("a,b", [(0, 0), (2, 1), (3, 2), (0, 5), (1, 4)])
def test_triangle_rule_exact_to_degree_five(a, b):
    from math import factorial

    r = gauss_triangle_7()
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert_allclose(r.weights @ (r.points[:, 0] ** a * r.points[:, 1] ** b), exact, rtol=1e-12)


@pytest.mark.parametrize("shape,nodes", [(q2_shape, Q2_NODES), (t2_shape, T2_NODES)])
def test_lagrange_bases_are_nodal(shape, nodes):
    ev = shape(nodes)
    assert_allclose(ev.values, np.eye(len(nodes)), atol=1e-15)
    pts = np.random.default_rng(0).uniform(0, 0.4, (10, 2))
    ev = shape(pts)
    assert_allclose(ev.values.sum(axis=1), 1.0, atol=1e-14)
    assert_allclose(ev.gradients.sum(axis=1), 0.0, atol=1e-13)


@pytest.mark.parametrize("shape", [q2_shape, t2_shape])
def test_lagrange_gradients_match_finite_differences(shape):
    p = np.array([[0.21, 0.33]])
    h = 1e-6
    ev = shape(p)
    for j in range(2):
        dp = np.zeros(2)
        dp[j] = h
        fd = (shape(p + dp).values - shape(p - dp).values) / (2 * h)
        assert_allclose(ev.gradients[..., j], fd, atol=1e-8)


def test_line3_order_and_values():
    ev = line3_shape(np.array([-1.0, 1.0, 0.0]))
    assert_allclose(ev.values, np.eye(3), atol=1e-15)


def test_nq2_duality():
    """Each dof functional picks out exactly its own basis function."""
    M = nq2_functionals(lambda p: nq2_shape(p).values)
    assert_allclose(M, np.eye(12), atol=1e-13)


def test_nq2_curl_matches_finite_differences():
    p = np.array([[0.3, -0.45]])
    h = 1e-6
    dx = (nq2_shape(p + [h, 0]).values - nq2_shape(p - [h, 0]).values) / (2 * h)
    dy = (nq2_shape(p + [0, h]).values - nq2_shape(p - [0, h]).values) / (2 * h)
    curl = dx[..., 1] - dy[..., 0]
    assert_allclose(nq2_shape(p).curls, curl, atol=1e-7)


def test_nq2_edge_trace_matches_trace_basis():
    s = np.linspace(-1, 1, 7)
    for k, (a, b) in enumerate(QUAD_EDGES):
        pa, pb = QUAD_CORNERS[a], QUAD_CORNERS[b]
        t = (pb - pa) / 2
        pts = (pa + pb) / 2 + s[:, None] * t
        tr = nq2_shape(pts).values @ t  # (7, 12)
        expect = np.zeros((7, 12))
        expect[:, 2 * k : 2 * k + 2] = edge_trace_basis(s)
        assert_allclose(tr, expect, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.lists(coef, min_size=9, max_size=9))
def test_gradient_inclusion_and_de_rham(c):
    """The NQ2 interpolant of grad(phi), phi in Q2, is exact and curl free."""
    c = np.array(c)

    def grad_phi(p):
        return q2_shape(p).gradients.transpose(0, 2, 1) @ c  # (npts, 2)

    dofs = nq2_interpolate(lambda p: grad_phi(p)[:, None, :])[:, 0]
    pts = np.random.default_rng(1).uniform(-1, 1, (15, 2))
    ev = nq2_shape(pts)
    assert_allclose(np.einsum("pkc,k->pc", ev.values, dofs), grad_phi(pts), atol=1e-12)
    assert np.abs(ev.curls @ dofs).max() < 1e-12


def _two_cells(shift):
    """Two quads sharing the edge between physical corners B and C."""
    A, B, C, D = np.array([[0, 0], [1.0, 0.1], [1.2 + shift, 1.1], [0.1, 0.9]])
    E, F = np.array([[2.1, -0.2], [2.3, 1.0]])
    quad = lambda c: np.vstack([c, (c + np.roll(c, -1, 0)) / 2, c.mean(0)])
    left = quad(np.array([A, B, C, D]))
    right = quad(np.array([B, E, F, C]))
    return left, right


@pytest.mark.parametrize("shift", [0.0, 0.3])
def test_nedelec_tangential_continuity(shift):
    """Shared-edge basis functions have the same tangential trace from both sides."""
    left, right = _two_cells(shift)
    ids_left = np.array([0, 1, 2, 3])
    ids_right = np.array([1, 4, 5, 2])
    s = np.linspace(-0.9, 0.9, 5)
    # shared edge: local edge 1 (corner 1 -> 2) on the left, edge 3 (corner 3 -> 0) on the right
    pl = np.column_stack([np.ones_like(s), s])
    pr = np.column_stack([-np.ones_like(s), s])
    out = []
    for X, ids, p, k in ((left, ids_left, pl, 1), (right, ids_right, pr, 3)):
        ev = q2_shape(p)
        emap = element_map(X, ev.gradients)
        phys = map_covariant(nq2_shape(p), emap, edge_signs(ids))
        x = ev.values @ X
        tangent = X[2] - X[1] if k == 1 else X[0] - X[3]
        out.append((x, phys.values[:, 2 * k : 2 * k + 2], tangent))
    (xl, vl, tl), (xr, vr, tr) = out
    assert_allclose(xl, xr, atol=1e-14)
    t = tl / np.linalg.norm(tl)
    assert_allclose(np.einsum("pkc,c->pk", vl, t), np.einsum("pkc,c->pk", vr, t), atol=1e-13)


def test_edge_signs_only_flip_constant_moments():
    s = edge_signs(np.array([5, 2, 7, 1]))
    assert_allclose(s[0:8:2], [-1, 1, -1, 1])
    assert_allclose(s[1:8:2], 1)
    assert_allclose(s[8:], 1)


def test_covariant_map_rejects_inverted_cells():
    X = Q2_NODES.copy()
    X[:, 0] *= -1
    ev = q2_shape(gauss_quad(2).points)
    with pytest.raises(ValueError, match="Jacobian"):
        map_covariant(ev, element_map(X, ev.gradients))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(-1, 1))
def test_affine_map_gradients(a, b, shear):
    """Physical gradients of an affine field are recovered on any affine cell."""
    Jm = np.array([[a, shear], [0, b]])
    X = Q2_NODES @ Jm.T
    pts = gauss_quad(2).points
    ev = q2_shape(pts)
    phys = map_covariant(ev, element_map(X, ev.gradients))
    g = np.array([0.7, -1.3])
    vals = X @ g
    assert_allclose(np.einsum("pbj,b->pj", phys.gradients, vals), np.broadcast_to(g, (4, 2)), atol=1e-12)
