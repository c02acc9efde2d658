"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with the measured values; the lines are
echoed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import ACCEPTANCE_LINES
from relaxmm.assembly import DofMap, assemble_elasticity, assemble_rmm, consistent_coupling_constraints, dirichlet_u
from relaxmm.elements import (
    QUAD_EDGES,
    QUAD_CORNERS,
    edge_signs,
    edge_trace_basis,
    element_map,
    map_covariant,
    nq2_functionals,
    nq2_interpolate,
    nq2_shape,
    q2_shape,
)
from relaxmm.experiments import (
    CELL_L,
    ScenarioConfig,
    bending_resolved,
    bending_rmm,
    cantilever_rmm,
    d_macro,
    default_lc_sweep,
    rmm_material,
    run_scenario,
    shear_macro,
    shear_rmm,
    t_macro,
    w_macro,
)
from relaxmm.identify import (
    CELL_D,
    DEFAULT_APPARENT,
    MATRIX,
    apparent_affine,
    beta_bending,
    homogenize_macro,
)
from relaxmm.materials import CubicParams, RmmMaterial, alpha_upper_bound, lowner_sup_cubic, reuss_ce
from relaxmm.mesh import UnitCellSpec, build_cell_cluster, build_structured_quad_grid, build_unit_cell_mesh
from relaxmm.solve import SystemMatrix, solve, strain_energy

H = 2 * CELL_L
SWEEP = default_lc_sweep()


def record(n: int, ok: bool, text: str):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")
    assert ok, text


def rel(a, b):
    return abs(a - b) / abs(b)


def beam_ratios(params, bc, loading="rotation", lcs=SWEEP, candidate="beta-scaled", mu_c=0.0):
    ref = d_macro(params.C_macro, H)
    return np.array([bending_rmm(rmm_material(params, candidate, lc, mu_c), loading, bc).D / ref for lc in lcs])


def test_criterion_01_macro_tensor():
    t = time.perf_counter()
    res = homogenize_macro(build_unit_cell_mesh(UnitCellSpec(CELL_L, CELL_D, 1, 4)))
    dt = time.perf_counter() - t
    got = res.params.gpa()
    err = np.abs(got / np.array([17.61, 15.13, 9.98]) - 1).max()
    record(1, err < 0.02 and dt < 30,
           f"C_macro = ({got[0]:.3f}, {got[1]:.3f}, {got[2]:.3f}) GPa, max rel. error {err:.2%} < 2%, {dt:.1f} s < 30 s")


def test_criterion_02_apparent_tensors():
    t = time.perf_counter()
    worst = []
    for v, ref in DEFAULT_APPARENT.items():
        got = apparent_affine(build_unit_cell_mesh(UnitCellSpec(CELL_L, CELL_D, v, 4))).params.gpa()
        err = np.abs(got / ref.gpa() - 1).max()
        worst.append((err, 0.02 if v <= 2 else 0.03))
    dt = time.perf_counter() - t
    ok = all(e < tol for e, tol in worst) and dt < 120
    errs = ", ".join(f"v{i + 1} {e:.2%}" for i, (e, _) in enumerate(worst))
    record(2, ok, f"apparent moduli max rel. errors {errs} (tol 2%/3%), {dt:.1f} s < 120 s")


def test_criterion_03_lowner_supremum():
    sup = lowner_sup_cubic(DEFAULT_APPARENT.values())
    alpha = alpha_upper_bound(MATRIX, sup)
    got = sup.gpa()
    ok = np.allclose(got, [20.15, 15.83, 14.61], rtol=0, atol=5e-12) and round(alpha, 2) == 1.66
    record(3, ok, f"supremum ({got[0]:.4f}, {got[1]:.4f}, {got[2]:.4f}) GPa, alpha = {alpha:.4f}")


def test_criterion_04_beta_sequence():
    c_macro = homogenize_macro(build_unit_cell_mesh(UnitCellSpec(CELL_L, CELL_D, 1, 4))).params
    spec = UnitCellSpec(CELL_L, CELL_D, 1, 4)
    betas = [beta_bending(build_cell_cluster(spec, n, n), c_macro) for n in (1, 2, 4)]
    ok = rel(betas[0], 1.64) < 0.02 and betas[0] > betas[1] > betas[2] > 1.0
    record(4, ok, f"beta(1x1, 2x2, 4x4) = ({betas[0]:.4f}, {betas[1]:.4f}, {betas[2]:.4f}), "
                  f"1x1 off 1.64 by {rel(betas[0], 1.64):.2%}")


def _patch_energy(Lc, E, couple):
    macro = CubicParams.from_gpa(17.61, 15.13, 9.98)
    micro = macro.scaled(1.75)
    mat = RmmMaterial(reuss_ce(micro, macro), micro, mu_curv=macro.mu, Lc=Lc)
    mesh = build_structured_quad_grid(2 * CELL_L, 2 * CELL_L, 3, 3)
    dm = DofMap(mesh, with_P=True)
    cs = dirichlet_u(dm, mesh.boundary_nodes("boundary"), lambda x: x @ E.T)
    if couple:
        cs = cs.merge(consistent_coupling_constraints(mesh, dm, "boundary"))
    sol = solve(SystemMatrix(assemble_rmm(mesh, mat, dm), np.zeros(dm.n_dofs), dm, cs, mat))
    eps = np.array([E[0, 0], E[1, 1], E[0, 1] + E[1, 0]])
    area = (2 * CELL_L) ** 2
    return strain_energy(sol), 0.5 * eps @ macro.voigt().matrix @ eps * area, 0.5 * eps @ micro.voigt().matrix @ eps * area


def test_criterion_05_reuss_and_micro_limits():
    E = np.array([[1e-3, 3e-4], [-1e-4, -6e-4]])
    w0, ref_macro, _ = _patch_energy(0.0, E, couple=False)
    w1, _, ref_micro = _patch_energy(1e3 * CELL_L, E, couple=True)
    e0, e1 = rel(w0, ref_macro), rel(w1, ref_micro)
    record(5, e0 < 1e-8 and e1 < 0.01,
           f"Lc = 0 energy rel. error {e0:.1e} < 1e-8; Lc = 1e3 l coupled energy rel. error {e1:.1e} < 1e-2")


def test_criterion_06_bending_limits(params):
    t = time.perf_counter()
    r = beam_ratios(params, "cc-both-ends")
    dt = time.perf_counter() - t
    target = params.C_micro["beta-scaled"].lam / params.C_macro.lam  # uniform scaling: D_micro / D_macro
    # nondecreasing up to 0.1% numerical slack: D comes from a curvature fit
    # whose value drifts by ~1e-9 on the Lc -> 0 plateau
    steps = np.diff(r) / r[:-1]
    bounded = np.all((r >= 0.99) & (r <= target + 0.01))
    ok = 0.99 <= r[0] <= 1.01 and rel(r[-1], target) < 0.03 and steps.min() >= -1e-3 and bounded and dt < 300
    record(6, ok, f"D/D_macro = {r[0]:.5f} at 1e-6 l, {r[-1]:.5f} at 1e3 l (target {target:.3f}), "
                  f"min relative step {steps.min():.1e} >= -1e-3, bounded, 10-point sweep {dt:.1f} s < 300 s")


def test_criterion_07_insufficient_bcs(params):
    ranges = {}
    for bc in ("cc-left-only", "cc-none"):
        r = beam_ratios(params, bc)
        ranges[bc] = (r.min(), r.max())
    ok = all(abs(lo - 1) <= 0.01 and abs(hi - 1) <= 0.01 for lo, hi in ranges.values())
    text = "; ".join(f"{bc} D/D_macro in [{lo:.5f}, {hi:.5f}]" for bc, (lo, hi) in ranges.items())
    record(7, ok, text)


def test_criterion_08_loading_equivalence(params):
    diffs = []
    for n in (1, 2):
        a, b = bending_resolved(n, "rotation").D, bending_resolved(n, "traction").D
        diffs.append((f"resolved n={n}", rel(b, a)))
    lcs = [1e-3 * CELL_L, CELL_L, 1e3 * CELL_L]
    a = beam_ratios(params, "cc-both-ends", "rotation", lcs)
    b = beam_ratios(params, "cc-both-ends", "traction", lcs)
    for lc, x, y in zip(lcs, a, b):
        diffs.append((f"RMM Lc={lc / CELL_L:g} l", rel(y, x)))
    ok = all(d < 0.005 for _, d in diffs)
    record(8, ok, "rotation vs traction: " + ", ".join(f"{k} {d:.3%}" for k, d in diffs) + " (< 0.5%)")


def test_criterion_09_cosserat_insensitivity(params):
    mu = params.C_macro.mu
    cfg = ScenarioConfig(scenario="bending-rmm", candidate="cosserat-limit", lc=SWEEP,
                         mu_c=[0.0, 0.1 * mu, mu, 2 * mu])
    res = run_scenario(cfg, params)
    e = res.column("energy_ratio").reshape(4, len(SWEEP))
    spread = ((e.max(axis=0) - e.min(axis=0)) / e.min(axis=0)).max()
    record(9, spread < 0.005, f"Pi/Pi_macro over mu_c in {{0, 0.1, 1, 2}} mu_macro: max spread {spread:.3%} "
                              f"(< 0.5%), range {e.min():.4f}..{e.max():.1f}")


def test_criterion_10_resolved_size_effect(params):
    t = time.perf_counter()
    r = np.array([bending_resolved(n).D / d_macro(params.C_macro, n * CELL_L) for n in (1, 2, 3)])
    dt = time.perf_counter() - t
    ok = r[0] > r[1] > r[2] > 1 and dt < 900
    record(10, ok, f"D/D_macro for n = 1, 2, 3: {r[0]:.4f}, {r[1]:.4f}, {r[2]:.4f}, {dt:.1f} s < 900 s")


def _element_suite_errors():
    errs = {}
    errs["duality"] = np.abs(nq2_functionals(lambda p: nq2_shape(p).values) - np.eye(12)).max()

    # tangential continuity across a shared edge of two distorted quads
    quad = lambda c: np.vstack([c, (c + np.roll(c, -1, 0)) / 2, c.mean(0)])
    A, B, C, D, E, F = np.array([[0, 0], [1.0, 0.1], [1.5, 1.1], [0.1, 0.9], [2.1, -0.2], [2.3, 1.0]])
    s = np.linspace(-0.9, 0.9, 7)
    traces = []
    for X, ids, p, k in ((quad(np.array([A, B, C, D])), [0, 1, 2, 3], np.column_stack([np.ones_like(s), s]), 1),
                         (quad(np.array([B, E, F, C])), [1, 4, 5, 2], np.column_stack([-np.ones_like(s), s]), 3)):
        ev = q2_shape(p)
        phys = map_covariant(nq2_shape(p), element_map(X, ev.gradients), edge_signs(np.array(ids)))
        t = (C - B) / np.linalg.norm(C - B)
        traces.append(np.einsum("pkc,c->pk", phys.values[:, 2 * k: 2 * k + 2], t))
    errs["tangential continuity"] = np.abs(traces[0] - traces[1]).max()

    # gradient inclusion: interpolant of grad(phi) for phi in Q2 is exact and curl free
    c = np.random.default_rng(7).uniform(-1, 1, 9)
    grad_phi = lambda p: q2_shape(p).gradients.transpose(0, 2, 1) @ c
    dofs = nq2_interpolate(lambda p: grad_phi(p)[:, None, :])[:, 0]
    pts = np.random.default_rng(8).uniform(-1, 1, (20, 2))
    ev = nq2_shape(pts)
    errs["gradient inclusion"] = np.abs(np.einsum("pkc,k->pc", ev.values, dofs) - grad_phi(pts)).max()
    errs["curl of gradient"] = np.abs(ev.curls @ dofs).max()

    # Q2 patch test on a distorted mesh
    g = build_structured_quad_grid(3.0, 2.0, 3, 2)
    X = g.nodes.copy()
    inner = (X[:, 0] > 0) & (X[:, 0] < 3) & (X[:, 1] > 0) & (X[:, 1] < 2)
    X[inner] += np.random.default_rng(3).uniform(-0.15, 0.15, (inner.sum(), 2))
    for k, (a, b) in enumerate(QUAD_EDGES):
        X[g.cells[:, 4 + k]] = (X[g.cells[:, a]] + X[g.cells[:, b]]) / 2
    X[g.cells[:, 8]] = X[g.cells[:, :4]].mean(axis=1)
    from relaxmm.mesh import Mesh2D

    mesh = Mesh2D(X, g.cells, "quad9", g.material_id, g.boundary)
    G = np.array([[1e-3, 4e-4], [-2e-4, -5e-4]])
    Cv = CubicParams.from_gpa(17.61, 15.13, 9.98).voigt()
    dm = DofMap(mesh)
    cs = dirichlet_u(dm, mesh.boundary_nodes("boundary"), lambda x: x @ G.T)
    sol = solve(SystemMatrix(assemble_elasticity(mesh, Cv, dm), np.zeros(dm.n_dofs), dm, cs, Cv))
    errs["Q2 patch test"] = np.abs(sol.u - X @ G.T).max() / np.abs(X @ G.T).max()
    return errs


def test_criterion_11_element_suite():
    errs = _element_suite_errors()
    ok = max(errs.values()) < 1e-12
    record(11, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (all < 1e-12)")


def test_criterion_12_validation_scenarios(params):
    c = params.C_macro
    L = 12 * H
    t_mac = shear_macro(c) / t_macro(c, 1e-3, L)
    target = params.C_micro["beta-scaled"].mu_star / c.mu_star
    t_big = shear_rmm(rmm_material(params, "beta-scaled", 1e3 * CELL_L)) / t_macro(c, 1e-3, L)
    wm = w_macro(c, 1e9, H, L)
    small = rmm_material(params, "beta-scaled", 1e-6 * CELL_L)
    w_whole = wm / cantilever_rmm(small, "cc-whole-boundary")[0]
    w_part = wm / cantilever_rmm(small, "cc-partial-y")[0]
    ok = (abs(t_mac - 1) < 1e-10 and rel(t_big, target) < 0.03
          and abs(w_whole - 1) < 0.02 and abs(w_part - 1) < 0.02)
    record(12, ok, f"shear T/T_macro macro {t_mac:.12f}, RMM at 1e3 l {t_big:.4f} vs {target:.3f}; "
                   f"cantilever w_macro/w at 1e-6 l: whole boundary {w_whole:.4f}, partial-y {w_part:.4f}")
