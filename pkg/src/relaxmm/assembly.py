"""Dof numbering, sparse assembly and constraints.

Displacement dofs come first (``2 * node + component``).  For micromorphic
problems every NQ2 scalar dof carries one value per row of P: edge ``e`` owns
scalar dofs ``2e`` (constant tangential moment, oriented from the lower to the
higher global node id) and ``2e + 1`` (first moment), cell ``c`` owns the
interior scalars ``2 n_edges + 4c + j``.  The global index of row ``i`` of
scalar ``s`` is ``2 n_nodes + 2 s + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import (
    edge_signs,
    edge_trace_basis,
    element_map,
    gauss_1d,
    gauss_quad,
    gauss_triangle_7,
    line3_shape,
    map_covariant,
    nq2_shape,
    q2_shape,
    t2_shape,
)
from .materials import RmmMaterial, VoigtTensor
from .mesh import Mesh2D, PeriodicPairs

CHUNK = 4096


# -- dof map ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: Mesh2D
    with_P: bool = False

    def __post_init__(self):
        if self.with_P and self.mesh.kind != "quad9":
            raise ValueError("micro-distortion dofs need a quad9 mesh")

    @property
    def n_u(self) -> int:
        return 2 * self.mesh.n_nodes

    @property
    def n_edges(self) -> int:
        return len(self.mesh.edges) if self.with_P else 0

    @property
    def n_scalar_P(self) -> int:
        return 2 * self.n_edges + 4 * self.mesh.n_cells if self.with_P else 0

    @property
    def n_dofs(self) -> int:
        return self.n_u + 2 * self.n_scalar_P

    def u_dofs(self, nodes, comp=None) -> np.ndarray:
        nodes = np.asarray(nodes)
        if comp is None:
            return np.stack([2 * nodes, 2 * nodes + 1], axis=-1)
        return 2 * nodes + comp

    def p_dof(self, scalar, row) -> np.ndarray:
        return self.n_u + 2 * np.asarray(scalar) + row

    def edge_P_dofs(self, edges) -> np.ndarray:
        """(m, 2 moments, 2 rows) global P dofs of the given edges."""
        e = np.asarray(edges)
        s = np.stack([2 * e, 2 * e + 1], axis=-1)
        return np.stack([self.p_dof(s, 0), self.p_dof(s, 1)], axis=-1)

    def cell_scalar_P(self) -> np.ndarray:
        """(E, 12) global NQ2 scalar dofs in local basis order."""
        ce = self.mesh.cell_edges
        E = self.mesh.n_cells
        out = np.empty((E, 12), dtype=np.int64)
        out[:, 0:8:2] = 2 * ce
        out[:, 1:8:2] = 2 * ce + 1
        out[:, 8:] = 2 * self.n_edges + 4 * np.arange(E)[:, None] + np.arange(4)
        return out

    def cell_dofs(self) -> np.ndarray:
        """Element dof lists: 2 per node, then (basis, row) pairs for P."""
        u = self.u_dofs(self.mesh.cells).reshape(self.mesh.n_cells, -1)
        if not self.with_P:
            return u
        s = self.cell_scalar_P()
        p = np.stack([self.p_dof(s, 0), self.p_dof(s, 1)], axis=-1).reshape(self.mesh.n_cells, -1)
        return np.hstack([u, p])

    def edge_ids(self, line3) -> np.ndarray:
        """Global edge index of each boundary line3 (end, end, mid)."""
        edges = self.mesh.edges
        n = self.mesh.n_nodes
        key = edges[:, 0].astype(np.int64) * n + edges[:, 1]
        lo = np.minimum(line3[:, 0], line3[:, 1]).astype(np.int64)
        hi = np.maximum(line3[:, 0], line3[:, 1])
        q = lo * n + hi
        pos = np.searchsorted(key, q)
        if np.any(pos >= len(key)) or np.any(key[np.minimum(pos, len(key) - 1)] != q):
            raise ValueError("boundary segment is not an edge of the mesh")
        return pos


# -- constraints --------------------------------------------------------------


@dataclass
class ConstraintSet:
    """Dirichlet values and linear relations slave = sum_k c_k master_k + g."""

    dirichlet: dict = field(default_factory=dict)
    mpc: dict = field(default_factory=dict)  # slave -> (masters, coefs, const)

    def fix(self, dofs, values=0.0):
        dofs = np.atleast_1d(np.asarray(dofs)).ravel()
        vals = np.broadcast_to(np.asarray(values, float), dofs.shape) if np.ndim(values) == 0 else np.asarray(values, float).ravel()
        for d, v in zip(dofs.tolist(), vals.tolist()):
            if d in self.mpc:
                raise ValueError(f"dof {d} is already a multipoint slave")
            if d in self.dirichlet and not np.isclose(self.dirichlet[d], v, rtol=1e-12, atol=1e-300):
                raise ValueError(f"conflicting Dirichlet values on dof {d}")
            self.dirichlet[d] = v
        return self

    def tie(self, slave, masters, const=0.0, coefs=1.0):
        """Add slave = sum(coefs * masters) + const."""
        slave = int(slave)
        masters = tuple(int(m) for m in np.atleast_1d(masters))
        coefs = tuple(float(c) for c in np.broadcast_to(np.asarray(coefs, float), (len(masters),)))
        if slave in self.dirichlet:
            raise ValueError(f"dof {slave} is already Dirichlet")
        if slave in self.mpc or slave in masters:
            raise ValueError(f"conflicting multipoint constraint on dof {slave}")
        self.mpc[slave] = (masters, coefs, float(const))
        return self

    def merge(self, other: "ConstraintSet") -> "ConstraintSet":
        out = ConstraintSet(dict(self.dirichlet), dict(self.mpc))
        out.fix(list(other.dirichlet), list(other.dirichlet.values()))
        for s, (m, c, g) in other.mpc.items():
            out.tie(s, m, g, c)
        return out

    @property
    def constrained(self) -> np.ndarray:
        return np.array(sorted(set(self.dirichlet) | set(self.mpc)), dtype=np.int64)

    def transform(self, n: int):
        """Return (T, g, free) with full = T @ reduced + g."""
        fixed = np.zeros(n, bool)
        fixed[list(self.dirichlet)] = True
        fixed[list(self.mpc)] = True
        free = np.flatnonzero(~fixed)
        col = np.full(n, -1)
        col[free] = np.arange(len(free))
        resolved = {}
        active = set()

        def resolve(d):
            # -> ({column: coef}, const)
            if d in resolved:
                return resolved[d]
            if d in active:
                raise ValueError("cyclic multipoint constraints")
            if d in self.dirichlet:
                res = ({}, self.dirichlet[d])
            elif d in self.mpc:
                active.add(d)
                masters, coefs, g = self.mpc[d]
                comb, const = {}, g
                for m, c in zip(masters, coefs):
                    mc, mg = resolve(m)
                    const += c * mg
                    for k, v in mc.items():
                        comb[k] = comb.get(k, 0.0) + c * v
                active.discard(d)
                res = (comb, const)
            else:
                res = ({int(col[d]): 1.0}, 0.0)
            resolved[d] = res
            return res

        rows, cols, vals = list(free), list(range(len(free))), [1.0] * len(free)
        g = np.zeros(n)
        for d in list(self.dirichlet) + list(self.mpc):
            comb, v = resolve(d)
            g[d] = v
            for c, k in comb.items():
                if k != 0.0:
                    rows.append(d)
                    cols.append(c)
                    vals.append(k)
        T = sp.csr_matrix((vals, (rows, cols)), shape=(n, len(free)))
        return T, g, free


# -- helpers ------------------------------------------------------------------


def _scatter(dofs, ke, n) -> sp.csr_matrix:
    """Sum element matrices ke (E, m, m) into an n x n CSR matrix."""
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def _ref_rule(kind):
    if kind == "quad9":
        rule = gauss_quad(3)
        return rule, q2_shape(rule.points)
    rule = gauss_triangle_7()
    return rule, t2_shape(rule.points)


def _voigt_strain_B(grads):
    """Engineering-strain operator (..., 3, 2 nb) from physical gradients (..., nb, 2)."""
    shp = grads.shape[:-2]
    nb = grads.shape[-2]
    B = np.zeros(shp + (3, 2 * nb))
    B[..., 0, 0::2] = grads[..., 0]
    B[..., 1, 1::2] = grads[..., 1]
    B[..., 2, 0::2] = grads[..., 1]
    B[..., 2, 1::2] = grads[..., 0]
    return B


def material_table(mesh: Mesh2D, materials) -> np.ndarray:
    """Stack of Voigt matrices indexed by material id."""
    if isinstance(materials, dict):
        ids = np.unique(mesh.material_id)
        missing = [int(i) for i in ids if int(i) not in materials]
        if missing:
            raise KeyError(f"no material for id(s) {missing}")
        top = int(ids.max()) + 1
        tab = np.zeros((top, 3, 3))
        for i in ids:
            tab[i] = np.asarray(materials[int(i)])
        return tab
    if isinstance(materials, (list, tuple)):
        if mesh.material_id.max() >= len(materials):
            raise KeyError(f"no material for id {int(mesh.material_id.max())}")
        return np.stack([np.asarray(m) for m in materials])
    one = np.asarray(materials)
    return np.broadcast_to(one, (int(mesh.material_id.max()) + 1, *one.shape))


# -- classical elasticity -----------------------------------------------------


def assemble_elasticity(mesh: Mesh2D, materials, dofmap: DofMap | None = None) -> sp.csr_matrix:
    """Plane-strain stiffness matrix of a tri6 or quad9 mesh.

    ``materials`` is a single Voigt tensor, a list indexed by material id or a
    dict keyed by material id.
    """
    dofmap = dofmap or DofMap(mesh)
    tab = material_table(mesh, materials)
    rule, ev = _ref_rule(mesh.kind)
    dofs = dofmap.cell_dofs()[:, : 2 * mesh.cells.shape[1]]
    parts = []
    for start in range(0, mesh.n_cells, CHUNK):
        sl = slice(start, start + CHUNK)
        emap = element_map(mesh.nodes[mesh.cells[sl]], ev.gradients)
        phys = map_covariant(ev, emap)
        B = _voigt_strain_B(phys.gradients)  # (e, q, 3, 2nb)
        C = tab[mesh.material_id[sl]]
        wdet = emap.det * rule.weights
        ke = np.einsum("eq,eqai,eab,eqbj->eij", wdet, B, C, B, optimize=True)
        parts.append(_scatter(dofs[sl], ke, dofmap.n_dofs))
    return sum(parts[1:], parts[0])


# -- relaxed micromorphic -----------------------------------------------------


def rmm_operators(mesh: Mesh2D, points, cells=None):
    """Pointwise operators of the micromorphic element at reference points.

    Returns a dict with arrays of shape (e, q, k, 42) mapping element dofs to
    ``u`` (k=2), ``grad_u`` and ``P`` (k=4, row-major ij) and ``curl`` (k=2),
    plus the element map.
    """
    cells = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
    conn = mesh.cells[cells]
    q2 = q2_shape(points)
    emap = element_map(mesh.nodes[conn], q2.gradients)
    phys_u = map_covariant(q2, emap)
    signs = edge_signs(conn[:, :4])
    phys_p = map_covariant(nq2_shape(points), emap, signs)
    e, q = emap.det.shape
    U = np.zeros((e, q, 2, 42))
    GU = np.zeros((e, q, 4, 42))
    PP = np.zeros((e, q, 4, 42))
    CU = np.zeros((e, q, 2, 42))
    for i in range(2):
        U[:, :, i, i:18:2] = q2.values[None]
        CU[:, :, i, 18 + i::2] = phys_p.curls
        for j in range(2):
            GU[:, :, 2 * i + j, i:18:2] = phys_u.gradients[..., j]
            PP[:, :, 2 * i + j, 18 + i::2] = phys_p.values[..., j]
    return {"u": U, "grad_u": GU, "P": PP, "curl": CU, "map": emap}


def _sym_voigt(T):
    """Engineering Voigt vector of the symmetric part of row-major 2x2 rows."""
    return np.stack([T[..., 0, :], T[..., 3, :], T[..., 1, :] + T[..., 2, :]], axis=-2)


def _skew(T):
    """Skew component (T12 - T21) / 2."""
    return 0.5 * (T[..., 1, :] - T[..., 2, :])


def rmm_element_matrices(mesh: Mesh2D, mat: RmmMaterial, cells=None) -> np.ndarray:
    rule = gauss_quad(3)
    ops = rmm_operators(mesh, rule.points, cells)
    A = ops["grad_u"] - ops["P"]
    sA, sP = _sym_voigt(A), _sym_voigt(ops["P"])
    wA, wP = _skew(A), _skew(ops["P"])
    wdet = ops["map"].det * rule.weights
    Ce, Cm = mat.C_e.matrix, mat.C_micro.matrix
    ke = np.einsum("eq,eqai,ab,eqbj->eij", wdet, sA, Ce, sA, optimize=True)
    ke += np.einsum("eq,eqai,ab,eqbj->eij", wdet, sP, Cm, sP, optimize=True)
    if mat.mu_c > 0:
        ke += 4 * mat.mu_c * np.einsum("eq,eqi,eqj->eij", wdet, wA, wA)
    else:
        ke += 4 * mat.skew_floor * np.einsum("eq,eqi,eqj->eij", wdet, wP, wP)
    if mat.curvature_modulus > 0:
        C = ops["curl"]
        ke += mat.curvature_modulus * np.einsum("eq,eqki,eqkj->eij", wdet, C, C, optimize=True)
    return ke


def assemble_rmm(mesh: Mesh2D, mat: RmmMaterial, dofmap: DofMap | None = None) -> sp.csr_matrix:
    """Stiffness of the relaxed micromorphic energy over (u, P)."""
    dofmap = dofmap or DofMap(mesh, with_P=True)
    dofs = dofmap.cell_dofs()
    parts = []
    for start in range(0, mesh.n_cells, CHUNK):
        idx = np.arange(start, min(start + CHUNK, mesh.n_cells))
        parts.append(_scatter(dofs[idx], rmm_element_matrices(mesh, mat, idx), dofmap.n_dofs))
    return sum(parts[1:], parts[0])


# -- boundary terms -----------------------------------------------------------


def _oriented(line3):
    """Reorder line3 rows so the first node has the lower global id."""
    l3 = np.asarray(line3).copy()
    flip = l3[:, 0] > l3[:, 1]
    l3[flip, 0], l3[flip, 1] = line3[flip, 1], line3[flip, 0]
    return l3


def _line_geometry(mesh, line3, s):
    ev = line3_shape(s)
    X = mesh.nodes[line3]  # (m, 3, 2)
    dxds = np.einsum("qa,mac->mqc", ev.gradients, X)
    jac = np.linalg.norm(dxds, axis=-1)
    x = np.einsum("qa,mac->mqc", ev.values, X)
    return ev, x, dxds, jac


def assemble_consistent_coupling_penalty(mesh: Mesh2D, dofmap: DofMap, tag, kappa1: float, mask=(1, 1)) -> sp.csr_matrix:
    """Penalty kappa1/2 * int sum_i mask_i ((P - grad u) . tau)_i^2 ds on a tag."""
    n = dofmap.n_dofs
    line3 = mesh.boundary.get(tag) if isinstance(tag, str) else np.asarray(tag)
    if line3 is None or len(line3) == 0:
        raise ValueError(f"no boundary segments tagged {tag!r}")
    if kappa1 == 0:
        return sp.csr_matrix((n, n))
    l3 = _oriented(line3)
    rule = gauss_1d(3)
    ev, _, _, jac = _line_geometry(mesh, l3, rule.points)
    trace = edge_trace_basis(rule.points)  # (q, 2)
    udofs = dofmap.u_dofs(l3)  # (m, 3, 2)
    pdofs = dofmap.edge_P_dofs(dofmap.edge_ids(l3))  # (m, 2, 2)
    m = len(l3)
    ke_all, dof_all = [], []
    for i in range(2):
        if not mask[i]:
            continue
        dofs = np.hstack([udofs[:, :, i], pdofs[:, :, i]])  # (m, 5)
        # residual * |dx/ds| = trace . p - dN/ds . u
        R = np.concatenate([-np.broadcast_to(ev.gradients, (m,) + ev.gradients.shape), np.broadcast_to(trace, (m,) + trace.shape)], axis=2)
        w = rule.weights / jac  # (m, q): |r|^2 jac = (r jac)^2 / jac
        ke_all.append(kappa1 * np.einsum("mq,mqa,mqb->mab", w, R, R))
        dof_all.append(dofs)
    return _scatter(np.vstack(dof_all), np.concatenate(ke_all), n)


def consistent_coupling_constraints(mesh: Mesh2D, dofmap: DofMap, tag, mask=(1, 1)) -> ConstraintSet:
    """Impose P . tau = du/dtau exactly on tagged edges.

    The tangential trace of P on an edge is linear and so is the tangential
    derivative of the quadratic displacement, so both edge moments of each
    selected row are eliminated as linear combinations of the edge's
    displacement dofs.  This is the limit of an infinite coupling penalty.
    """
    line3 = mesh.boundary.get(tag) if isinstance(tag, str) else np.asarray(tag)
    if line3 is None or len(line3) == 0:
        raise ValueError(f"no boundary segments tagged {tag!r}")
    l3 = _oriented(line3)
    pdofs = dofmap.edge_P_dofs(dofmap.edge_ids(l3))
    cs = ConstraintSet()
    for k, (lo, hi, mid) in enumerate(l3):
        for i in range(2):
            if not mask[i]:
                continue
            ulo, uhi, umid = (int(dofmap.u_dofs(v, i)) for v in (lo, hi, mid))
            cs.tie(pdofs[k, 0, i], (uhi, ulo), 0.0, (1.0, -1.0))
            cs.tie(pdofs[k, 1, i], (uhi, ulo, umid), 0.0, (2 / 3, 2 / 3, -4 / 3))
    return cs


def apply_dirichlet_P_tangential(mesh: Mesh2D, dofmap: DofMap, tag, grad_u, penalized_edges=()) -> ConstraintSet:
    """Fix the tangential edge moments of both rows of P to those of grad_u.

    ``grad_u(x)`` returns (..., 2, 2) for points (..., 2); a constant 2x2
    array is accepted too.
    """
    line3 = mesh.boundary[tag] if isinstance(tag, str) else np.asarray(tag)
    l3 = _oriented(line3)
    eids = dofmap.edge_ids(l3)
    clash = np.intersect1d(eids, np.asarray(list(penalized_edges), dtype=np.int64))
    if len(clash):
        raise ValueError(f"edges {clash.tolist()[:5]} already carry a coupling penalty")
    rule = gauss_1d(5)
    _, x, dxds, _ = _line_geometry(mesh, l3, rule.points)
    G = _eval_grad(grad_u, x)  # (m, q, 2, 2)
    gt = np.einsum("mqij,mqj->mqi", G, dxds)
    d0 = np.einsum("q,mqi->mi", rule.weights, gt)
    d1 = np.einsum("q,mqi->mi", rule.weights * rule.points, gt)
    dofs = dofmap.edge_P_dofs(eids)
    return ConstraintSet().fix(dofs.ravel(), np.stack([d0, d1], axis=1).ravel())


def _eval_grad(grad_u, x):
    if callable(grad_u):
        return np.asarray(grad_u(x), float)
    G = np.asarray(grad_u, float)
    return np.broadcast_to(G, x.shape[:-1] + (2, 2))


def dirichlet_u(dofmap: DofMap, nodes, func, components=(0, 1)) -> ConstraintSet:
    """Fix displacement components at nodes to func(x) -> (m, 2)."""
    nodes = np.unique(np.asarray(nodes))
    vals = np.asarray(func(dofmap.mesh.nodes[nodes]), float).reshape(len(nodes), 2)
    cs = ConstraintSet()
    for c in components:
        cs.fix(dofmap.u_dofs(nodes, c), vals[:, c])
    return cs


def apply_periodic(dofmap: DofMap, pairs: PeriodicPairs, strain) -> ConstraintSet:
    """u_slave = u_master + E . offset, plus a pinned master corner.

    ``strain`` is the 2x2 macroscopic displacement gradient.
    """
    E = np.asarray(strain, float)
    jumps = pairs.offset @ E.T
    cs = ConstraintSet()
    for m, s, j in zip(pairs.master, pairs.slave, jumps):
        for c in range(2):
            cs.tie(dofmap.u_dofs(s, c), dofmap.u_dofs(m, c), j[c])
    slaves = set(pairs.slave.tolist())
    pin = next(int(m) for m in pairs.master if int(m) not in slaves)
    cs.fix(dofmap.u_dofs(pin), 0.0)
    return cs


def apply_traction(mesh: Mesh2D, dofmap: DofMap, tag, traction) -> np.ndarray:
    """Consistent nodal loads of a traction t(x) -> (..., 2) on tagged edges."""
    line3 = mesh.boundary[tag] if isinstance(tag, str) else np.asarray(tag)
    f = np.zeros(dofmap.n_dofs)
    if len(line3) == 0:
        return f
    rule = gauss_1d(3)
    ev, x, _, jac = _line_geometry(mesh, line3, rule.points)
    t = np.asarray(traction(x), float) if callable(traction) else np.broadcast_to(np.asarray(traction, float), x.shape)
    fe = np.einsum("q,mq,qa,mqc->mac", rule.weights, jac, ev.values, t)
    np.add.at(f, dofmap.u_dofs(line3), fe)
    return f
