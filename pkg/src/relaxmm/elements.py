"""Reference elements, quadrature rules and covariant mappings.

Conventions
-----------
quad9 (Q2): corners 0-3 counter-clockwise from (-1, -1), mid-side nodes 4-7 on
edges (0,1), (1,2), (2,3), (3,0), centre node 8.

tri6 (T2): corners (0,0), (1,0), (0,1), mid-side nodes on edges (0,1), (1,2), (2,0).

line3: end nodes at s = -1 and s = +1, mid node at s = 0.

NQ2: first-kind, second-order Nedelec space Q_{1,2} x Q_{2,1} on [-1, 1]^2 with
twelve dofs.  Local dof ``2k + q`` is the tangential moment of order ``q``
(weight 1 or s) on local edge ``k`` running from corner ``k`` to corner
``(k + 1) % 4``; dofs 8-11 are the interior moments against (1, 0), (xi, 0),
(0, 1), (0, eta).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

Q2_NODES = np.array(
    [[-1, -1], [1, -1], [1, 1], [-1, 1], [0, -1], [1, 0], [0, 1], [-1, 0], [0, 0]],
    dtype=float,
)
T2_NODES = np.array(
    [[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float
)
QUAD_CORNERS = Q2_NODES[:4]
# local edge k runs from corner k to corner (k+1) % 4; its mid-side node is 4 + k
QUAD_EDGES = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
TRI_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class ShapeEval:
    """Basis evaluated at a set of points.

    ``values`` has shape (npts, nbasis) for scalar bases and
    (npts, nbasis, 2) for vector bases; ``gradients`` is (npts, nbasis, 2) and
    ``curls`` (npts, nbasis).  Fields that do not apply are ``None``.
    """

    values: np.ndarray
    gradients: np.ndarray | None = None
    curls: np.ndarray | None = None


@dataclass(frozen=True)
class ElementMap:
    jacobian: np.ndarray  # (..., 2, 2), J[i, j] = dx_i / dxi_j
    det: np.ndarray
    inv_t: np.ndarray  # J^{-T}


# -- quadrature ---------------------------------------------------------------


def gauss_1d(n: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x, w)


def gauss_quad(n: int = 3) -> QuadratureRule:
    """Tensor Gauss rule on [-1, 1]^2 with n points per direction."""
    g = gauss_1d(n)
    xi, eta = np.meshgrid(g.points, g.points, indexing="ij")
    w = np.outer(g.weights, g.weights)
    return QuadratureRule(np.column_stack([xi.ravel(), eta.ravel()]), w.ravel())


def gauss_triangle_7() -> QuadratureRule:
    """Seven-point degree-5 rule on the unit triangle (weights sum to 1/2)."""
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    w0, w1, w2 = 0.225, 0.132394152788506, 0.125939180544827
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1],
            [b1, a1, b1],
            [b1, b1, a1],
            [a2, b2, b2],
            [b2, a2, b2],
            [b2, b2, a2],
        ]
    )
    w = np.array([w0, w1, w1, w1, w2, w2, w2]) / 2.0
    return QuadratureRule(bary[:, 1:].copy(), w)


# -- scalar Lagrange bases ----------------------------------------------------


def _lagrange_1d(x):
    x = np.asarray(x, dtype=float)
    v = np.stack([x * (x - 1) / 2, 1 - x**2, x * (x + 1) / 2], axis=-1)
    d = np.stack([x - 0.5, -2 * x, x + 0.5], axis=-1)
    return v, d


# 1D index (0: -1, 1: 0, 2: +1) of each quad9 node in xi and eta
_Q2_IX = np.array([0, 2, 2, 0, 1, 2, 1, 0, 1])
_Q2_IY = np.array([0, 0, 2, 2, 0, 1, 2, 1, 1])


def q2_shape(points) -> ShapeEval:
    """Biquadratic Lagrange basis at reference points of shape (npts, 2)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    vx, dx = _lagrange_1d(p[:, 0])
    vy, dy = _lagrange_1d(p[:, 1])
    values = vx[:, _Q2_IX] * vy[:, _Q2_IY]
    grads = np.stack(
        [dx[:, _Q2_IX] * vy[:, _Q2_IY], vx[:, _Q2_IX] * dy[:, _Q2_IY]], axis=-1
    )
    return ShapeEval(values, grads)


def t2_shape(points) -> ShapeEval:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = p[:, 0], p[:, 1]
    l1, l2, l3 = 1 - xi - eta, xi, eta
    values = np.stack(
        [
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            l3 * (2 * l3 - 1),
            4 * l1 * l2,
            4 * l2 * l3,
            4 * l3 * l1,
        ],
        axis=-1,
    )
    # d/dxi and d/deta with dl1 = (-1, -1), dl2 = (1, 0), dl3 = (0, 1)
    gx = np.stack(
        [
            -(4 * l1 - 1),
            4 * l2 - 1,
            np.zeros_like(xi),
            4 * (l1 - l2),
            4 * l3,
            -4 * l3,
        ],
        axis=-1,
    )
    gy = np.stack(
        [
            -(4 * l1 - 1),
            np.zeros_like(xi),
            4 * l3 - 1,
            -4 * l2,
            4 * l2,
            4 * (l1 - l3),
        ],
        axis=-1,
    )
    return ShapeEval(values, np.stack([gx, gy], axis=-1))


def line3_shape(s) -> ShapeEval:
    """Quadratic line basis, node order (s=-1, s=+1, s=0)."""
    v, d = _lagrange_1d(s)
    order = [0, 2, 1]
    return ShapeEval(v[..., order], d[..., order])


# -- Nedelec NQ2 --------------------------------------------------------------

# monomial exponents (a, b) for xi^a eta^b
_V1_EXP = [(a, b) for a in range(2) for b in range(3)]  # Q_{1,2}
_V2_EXP = [(a, b) for a in range(3) for b in range(2)]  # Q_{2,1}


def _monomials(points):
    """Vector monomial basis (npts, 12, 2) and its reference curl (npts, 12)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = p[:, 0], p[:, 1]
    n = len(p)
    vals = np.zeros((n, 12, 2))
    curl = np.zeros((n, 12))
    for j, (a, b) in enumerate(_V1_EXP):
        vals[:, j, 0] = x**a * y**b
        # curl = d v2/dxi - d v1/deta
        curl[:, j] = -(b * x**a * y ** (b - 1) if b else 0.0)
    for j, (a, b) in enumerate(_V2_EXP):
        vals[:, 6 + j, 1] = x**a * y**b
        curl[:, 6 + j] = a * x ** (a - 1) * y**b if a else 0.0
    return vals, curl


def nq2_functionals(field) -> np.ndarray:
    """Apply the twelve NQ2 dof functionals to ``field``.

    ``field(points) -> (npts, m, 2)`` evaluates m vector fields on the
    reference square; the result has shape (12, m).
    """
    g = gauss_1d(4)
    out = []
    for k, (a, b) in enumerate(QUAD_EDGES):
        pa, pb = QUAD_CORNERS[a], QUAD_CORNERS[b]
        t = (pb - pa) / 2
        pts = (pa + pb) / 2 + g.points[:, None] * t
        ft = field(pts) @ t  # (npts, m)
        for q in range(2):
            out.append(np.einsum("p,p,pm->m", g.weights, g.points**q, ft))
    quad = gauss_quad(4)
    f = field(quad.points)
    x, y = quad.points[:, 0], quad.points[:, 1]
    for weight, comp in ((1.0, 0), (x, 0), (1.0, 1), (y, 1)):
        out.append(np.einsum("p,p,pm->m", quad.weights, weight * np.ones_like(x), f[:, :, comp]))
    return np.array(out)


@lru_cache(maxsize=1)
def _nq2_coefficients():
    moments = nq2_functionals(lambda pts: _monomials(pts)[0])
    return np.linalg.inv(moments)  # column k: monomial coefficients of basis k


def nq2_shape(points) -> ShapeEval:
    """Dual NQ2 basis (12 vector functions) and reference curls."""
    vals, curl = _monomials(points)
    c = _nq2_coefficients()
    return ShapeEval(
        values=np.einsum("pjc,jk->pkc", vals, c),
        curls=curl @ c,
    )


def nq2_interpolate(field) -> np.ndarray:
    """Reference-element NQ2 interpolation dofs of ``field`` (shape (12, m))."""
    return nq2_functionals(field)


def edge_trace_basis(s) -> np.ndarray:
    """Tangential trace v_hat . t_hat of the two edge basis functions.

    Dual to the moments (1, s) on [-1, 1]: 1/2 and 3 s / 2.
    """
    s = np.asarray(s, dtype=float)
    return np.stack([0.5 * np.ones_like(s), 1.5 * s], axis=-1)


# -- mappings -----------------------------------------------------------------


def element_map(coords, ref_grads) -> ElementMap:
    """Isoparametric map for element node coordinates.

    coords: (..., nb, 2); ref_grads: (npts, nb, 2). Returns maps with shape
    (..., npts, 2, 2).
    """
    J = np.einsum("...bi,pbj->...pij", coords, ref_grads)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    inv_t = np.empty_like(J)
    inv_t[..., 0, 0] = J[..., 1, 1] / det
    inv_t[..., 1, 1] = J[..., 0, 0] / det
    inv_t[..., 0, 1] = -J[..., 1, 0] / det
    inv_t[..., 1, 0] = -J[..., 0, 1] / det
    return ElementMap(J, det, inv_t)


def map_covariant(ev: ShapeEval, emap: ElementMap, signs=None) -> ShapeEval:
    """Push reference values to the physical element.

    Scalar gradients and vector values transform with J^{-T}; curls are
    divided by det J.  ``signs`` (..., nbasis) flips basis functions whose
    local edge orientation disagrees with the global one.
    """
    if np.any(emap.det <= 0):
        raise ValueError("non-positive Jacobian determinant")
    grads = vals = curls = None
    if ev.gradients is not None:
        grads = np.einsum("...pij,pbj->...pbi", emap.inv_t, ev.gradients)
    if ev.values.ndim == 3:
        vals = np.einsum("...pij,pbj->...pbi", emap.inv_t, ev.values)
        curls = ev.curls / emap.det[..., None]
        if signs is not None:
            s = np.asarray(signs, dtype=float)[..., None, :]
            vals = vals * s[..., None]
            curls = curls * s
    else:
        vals = ev.values
    return ShapeEval(vals, grads, curls)


def curl2d(p_coeffs, ev: ShapeEval) -> np.ndarray:
    """Out-of-plane curls of both rows of P.

    p_coeffs: (12, 2) with column i holding the dofs of row i of P.
    Returns (npts, 2): (P12,1 - P11,2, P22,1 - P21,2).
    """
    return ev.curls @ np.asarray(p_coeffs, dtype=float)


def edge_signs(corner_ids) -> np.ndarray:
    """Per-basis sign for the NQ2 dofs of elements with global corner ids.

    corner_ids: (..., 4). Only the constant-moment dof of an edge depends on
    orientation; the s-weighted moment is invariant under edge reversal.
    """
    c = np.asarray(corner_ids)
    a = c[..., QUAD_EDGES[:, 0]]
    b = c[..., QUAD_EDGES[:, 1]]
    sgn = np.where(a < b, 1.0, -1.0)
    out = np.ones(c.shape[:-1] + (12,))
    out[..., 0:8:2] = sgn
    return out
