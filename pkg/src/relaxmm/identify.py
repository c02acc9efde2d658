"""Material identification: periodic and affine homogenization, bending
ratio beta, and the candidate micro tensors with their coupling tensors."""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import DofMap, apply_periodic, assemble_elasticity, dirichlet_u
from .materials import (
    GPa,
    CubicParams,
    IsotropicParams,
    VoigtTensor,
    alpha_upper_bound,
    cubic_dominates,
    lowner_sup_cubic,
    plane_strain_bending_modulus,
    reuss_ce,
)
from .mesh import Mesh2D, UnitCellSpec, build_cell_cluster, build_periodic_pairs, build_unit_cell_mesh
from .solve import SystemMatrix, evaluate_fields_at_cells, solve, strain_energy
from .elements import element_map, gauss_triangle_7, map_covariant, t2_shape, gauss_quad, q2_shape

MATRIX = IsotropicParams.from_gpa(52.35, 26.25)
INCLUSION = IsotropicParams.from_gpa(2.62, 1.31)
CELL_L = 1.9e-2
CELL_D = 1.2e-2
# reference moduli (GPa) used when no identification report is supplied
DEFAULT_C_MACRO = CubicParams.from_gpa(17.61, 15.13, 9.98)
DEFAULT_APPARENT = {
    1: CubicParams.from_gpa(18.26, 15.34, 14.61),
    2: CubicParams.from_gpa(20.15, 15.83, 14.44),
    3: CubicParams.from_gpa(19.25, 15.54, 13.19),
    4: CubicParams.from_gpa(19.56, 15.66, 12.68),
}
BETA_EXTRAPOLATED = 1.75
COSSERAT_FACTOR = 1000.0
CANDIDATES = ("loewner-scaled", "matrix", "beta-scaled", "cosserat-limit")

# engineering unit strains (11, 22, 12) as displacement gradients
UNIT_STRAINS = (
    np.array([[1.0, 0.0], [0.0, 0.0]]),
    np.array([[0.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, 0.5], [0.5, 0.0]]),
)


def phase_tensors(matrix=MATRIX, inclusion=INCLUSION):
    return [matrix.as_cubic().voigt(), inclusion.as_cubic().voigt()]


@dataclass
class HomogenizationResult:
    params: CubicParams
    voigt: VoigtTensor
    residual: float
    energies: np.ndarray
    warning: str | None = None


def _average_stress(sol, materials) -> np.ndarray:
    """Volume average of the stress in Voigt order."""
    mesh = sol.mesh
    if mesh.kind == "tri6":
        rule, ev = gauss_triangle_7(), t2_shape(gauss_triangle_7().points)
    else:
        rule, ev = gauss_quad(3), q2_shape(gauss_quad(3).points)
    emap = element_map(mesh.nodes[mesh.cells], ev.gradients)
    grads = map_covariant(ev, emap).gradients
    H = np.einsum("ebi,eqbj->eqij", sol.u[mesh.cells], grads)
    eps = np.stack([H[..., 0, 0], H[..., 1, 1], H[..., 0, 1] + H[..., 1, 0]], axis=-1)
    C = np.stack([np.asarray(m) for m in materials])[mesh.material_id]
    sig = np.einsum("eab,eqb->eqa", C, eps)
    w = emap.det * rule.weights
    return np.einsum("eq,eqa->a", w, sig) / w.sum()


def _run_cases(cell: Mesh2D, materials, constraint_for, threads=1):
    dm = DofMap(cell)
    K = assemble_elasticity(cell, materials, dm)
    f = np.zeros(dm.n_dofs)

    def one(E):
        sol = solve(SystemMatrix(K, f, dm, constraint_for(dm, E), materials))
        return _average_stress(sol, materials), strain_energy(sol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, UNIT_STRAINS))
    else:
        out = [one(E) for E in UNIT_STRAINS]
    C = np.column_stack([o[0] for o in out])
    energies = np.array([o[1] for o in out])
    return C, energies


def _finish(C, energies) -> HomogenizationResult:
    C = (C + C.T) / 2
    vt = VoigtTensor(C, "cubic")
    params, resid = vt.to_cubic()
    msg = None
    if resid > 0.01:
        msg = f"off-cubic residual {resid:.2%} exceeds 1%"
        warnings.warn(msg, stacklevel=3)
    return HomogenizationResult(params, vt, resid, energies, msg)


def homogenize_macro(cell: Mesh2D, materials=None, threads=1) -> HomogenizationResult:
    """Effective tensor from three periodic unit-strain problems."""
    materials = materials or phase_tensors()
    pairs = build_periodic_pairs(cell)
    C, e = _run_cases(cell, materials, lambda dm, E: apply_periodic(dm, pairs, E), threads)
    return _finish(C, e)


def apparent_affine(cell: Mesh2D, materials=None, threads=1) -> HomogenizationResult:
    """Apparent tensor from affine displacements on the whole cell boundary."""
    materials = materials or phase_tensors()
    bn = cell.boundary_nodes("boundary")
    C, e = _run_cases(cell, materials, lambda dm, E: dirichlet_u(dm, bn, lambda x: x @ E.T), threads)
    return _finish(C, e)


def bending_field(c_macro: CubicParams, kappa: float):
    """Displacement of pure bending with traction-free transverse stress."""
    r = c_macro.lam / (2 * c_macro.mu + c_macro.lam)

    def u(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([-kappa * X * Y, 0.5 * kappa * (r * Y**2 + X**2)], axis=-1)

    return u


def beta_bending(cluster: Mesh2D, c_macro: CubicParams, kappa: float = 1.0, materials=None) -> float:
    """Ratio of the heterogeneous to the homogeneous bending energy.

    The cluster must be centred at the origin; the homogeneous energy is
    evaluated in closed form from the second moment of area.
    """
    materials = materials or phase_tensors()
    dm = DofMap(cluster)
    K = assemble_elasticity(cluster, materials, dm)
    cs = dirichlet_u(dm, cluster.boundary_nodes("boundary"), bending_field(c_macro, kappa))
    sol = solve(SystemMatrix(K, np.zeros(dm.n_dofs), dm, cs, materials))
    e_het = strain_energy(sol)
    e_hom = 0.5 * plane_strain_bending_modulus(c_macro) * kappa**2 * second_moment_y(cluster)
    return e_het / e_hom


def second_moment_y(mesh: Mesh2D) -> float:
    """Integral of y^2 over the mesh (exact for straight-sided elements)."""
    if mesh.kind == "tri6":
        rule, ev = gauss_triangle_7(), t2_shape(gauss_triangle_7().points)
    else:
        rule, ev = gauss_quad(3), q2_shape(gauss_quad(3).points)
    X = mesh.nodes[mesh.cells]
    emap = element_map(X, ev.gradients)
    y = np.einsum("qb,eb->eq", ev.values, X[..., 1])
    return float(np.sum(emap.det * rule.weights * y**2))


# -- candidates ---------------------------------------------------------------


@dataclass
class IdentifiedParams:
    C_macro: CubicParams
    apparent: dict = field(default_factory=dict)
    lowner: CubicParams | None = None
    alpha: float | None = None
    beta: float | None = None
    beta_sequence: list = field(default_factory=list)
    beta_extrapolated: float = BETA_EXTRAPOLATED
    C_micro: dict = field(default_factory=dict)
    C_e: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        cub = lambda c: dict(zip(("lambda", "mu", "mu_star"), c.gpa().tolist()))
        return {
            "units": "GPa",
            "C_macro": cub(self.C_macro),
            "apparent": {str(k): cub(v) for k, v in self.apparent.items()},
            "lowner": cub(self.lowner) if self.lowner else None,
            "alpha": self.alpha,
            "beta": self.beta,
            "beta_sequence": self.beta_sequence,
            "beta_extrapolated": self.beta_extrapolated,
            "C_micro": {k: cub(v) for k, v in self.C_micro.items()},
            "C_e": {k: (np.asarray(v) / GPa).tolist() for k, v in self.C_e.items()},
            "residuals": self.residuals,
        }

    @classmethod
    def from_json(cls, data: dict) -> "IdentifiedParams":
        cub = lambda d: CubicParams.from_gpa(d["lambda"], d["mu"], d["mu_star"])
        out = cls(
            C_macro=cub(data["C_macro"]),
            apparent={int(k): cub(v) for k, v in data.get("apparent", {}).items()},
            lowner=cub(data["lowner"]) if data.get("lowner") else None,
            alpha=data.get("alpha"),
            beta=data.get("beta"),
            beta_sequence=list(data.get("beta_sequence", [])),
            beta_extrapolated=data.get("beta_extrapolated", BETA_EXTRAPOLATED),
            C_micro={k: cub(v) for k, v in data.get("C_micro", {}).items()},
            residuals=data.get("residuals", {}),
        )
        out.C_e = {k: reuss_ce(v, out.C_macro) for k, v in out.C_micro.items()}
        return out

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "IdentifiedParams":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_candidates(
    c_macro: CubicParams,
    lowner: CubicParams,
    alpha: float,
    beta_extrapolated: float = BETA_EXTRAPOLATED,
    matrix: IsotropicParams = MATRIX,
) -> tuple[dict, dict]:
    """The four named micro tensors and their Reuss coupling tensors."""
    micro = {
        "loewner-scaled": lowner.scaled(alpha),
        "matrix": matrix.as_cubic(),
        "beta-scaled": c_macro.scaled(beta_extrapolated),
        "cosserat-limit": c_macro.scaled(COSSERAT_FACTOR),
    }
    ce = {}
    for name, cm in micro.items():
        if not cubic_dominates(cm, c_macro) or cm == c_macro:
            raise ValueError(f"candidate {name!r} is not stiffer than C_macro")
        ce[name] = reuss_ce(cm, c_macro)
    return micro, ce


def default_parameters() -> IdentifiedParams:
    """Parameter set built from the reference moduli without any solves."""
    lw = lowner_sup_cubic(DEFAULT_APPARENT.values())
    alpha = alpha_upper_bound(MATRIX, lw)
    micro, ce = build_candidates(DEFAULT_C_MACRO, lw, alpha)
    return IdentifiedParams(DEFAULT_C_MACRO, dict(DEFAULT_APPARENT), lw, alpha, 1.64, [], BETA_EXTRAPOLATED, micro, ce)


def identify(
    refinement: int = 4,
    variants=(1, 2, 3, 4),
    cluster_sizes=(1, 2, 4),
    beta_refinement: int | None = None,
    threads: int = 1,
    cell: int = 1,
) -> IdentifiedParams:
    """Run the complete identification pipeline.

    ``cell`` is the variant used for periodic homogenization and the
    bending clusters; ``variants`` feed the Loewner supremum.
    """
    spec = lambda v, r=refinement: UnitCellSpec(CELL_L, CELL_D, v, r)
    macro = homogenize_macro(build_unit_cell_mesh(spec(cell)), threads=threads)
    apparent, residuals = {}, {"macro": macro.residual}
    for v in variants:
        res = apparent_affine(build_unit_cell_mesh(spec(v)), threads=threads)
        apparent[v] = res.params
        residuals[f"variant{v}"] = res.residual
    lw = lowner_sup_cubic(apparent.values())
    alpha = alpha_upper_bound(MATRIX, lw)
    betas = []
    for n in cluster_sizes:
        cl = build_cell_cluster(spec(cell, beta_refinement or refinement), n, n)
        betas.append(float(beta_bending(cl, macro.params)))
    micro, ce = build_candidates(macro.params, lw, alpha)
    return IdentifiedParams(
        macro.params, apparent, lw, alpha, betas[0] if betas else None, betas, BETA_EXTRAPOLATED, micro, ce, residuals
    )
