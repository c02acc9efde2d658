"""Beam bending, shear and cantilever scenarios for resolved and micromorphic
models, plus sweep drivers with CSV output.

Beams occupy [0, L] x [-H/2, H/2] with L = 12 H.  The left edge is a
symmetry plane (u_x = 0), the midpoint of the right edge is held in y, and
the right edge is either rotated (u_x = -kappa L y) or loaded by the linear
traction t_x = -2 tbar y / H.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .assembly import (
    ConstraintSet,
    DofMap,
    apply_dirichlet_P_tangential,
    apply_traction,
    assemble_consistent_coupling_penalty,
    assemble_elasticity,
    assemble_rmm,
    consistent_coupling_constraints,
    dirichlet_u,
)
from .identify import CELL_D, CELL_L, IdentifiedParams, default_parameters, phase_tensors
from .materials import CubicParams, RmmMaterial, VoigtTensor, plane_strain_bending_modulus
from .mesh import Mesh2D, UnitCellSpec, build_beam_mesh, build_structured_quad_grid
from .solve import SolutionField, SystemMatrix, reactions, solve, strain_energy, total_energy, write_solution_vtk

log = logging.getLogger(__name__)

SLENDERNESS = 12
BC_SCENARIOS = ("cc-both-ends", "cc-left-only", "cc-right-only", "cc-none", "cc-whole-boundary", "cc-partial-y")
SCENARIOS = (
    "bending-resolved",
    "bending-rmm",
    "shear-resolved",
    "shear-rmm",
    "cantilever-resolved",
    "cantilever-rmm",
    "identify",
)
CELL_NAMES = ("variant1", "variant2", "variant3", "variant4")
PENALTY_FACTOR = 1e3
BEAM_GRID = (48, 4)
CANTILEVER_GRID = (48, 12)
CANTILEVER_GRADING = 200.0


def default_lc_sweep(l: float = CELL_L, points: int = 10) -> list[float]:
    return list(np.logspace(-6, 3, points) * l)


# -- configuration ------------------------------------------------------------


@dataclass
class ScenarioConfig:
    scenario: str = "bending-rmm"
    n: int = 1
    loading: str = "rotation"
    candidate: str = "beta-scaled"
    lc: list = field(default_factory=lambda: [0.0])
    mu_c: list = field(default_factory=lambda: [0.0])
    mu_curv: float | None = None
    bc: str = "cc-both-ends"
    refinement: int = 2
    kappa: float = 1.0
    tbar: float = 1e9
    a: float = 1e-3
    sizes: list = field(default_factory=list)
    grid: tuple | None = None
    # None picks cantilever_grading for whole-boundary cantilevers
    y_grading: float | None = None
    height: float = 2 * CELL_L
    report: str | None = None
    vtk: bool = False
    cell: str = "variant1"

    def __post_init__(self):
        for name, kind in (("n", int), ("refinement", int), ("kappa", float), ("tbar", float), ("a", float),
                           ("height", float)):
            self._coerce(name, kind)
        if self.mu_curv is not None:
            self._coerce("mu_curv", float)
        if self.y_grading is not None:
            self._coerce("y_grading", float)
        if not isinstance(self.vtk, bool):
            raise ValueError("field 'vtk': expected true or false")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"field 'scenario': unknown value {self.scenario!r}")
        if self.loading not in ("rotation", "traction"):
            raise ValueError(f"field 'loading': unknown value {self.loading!r}")
        if self.bc not in BC_SCENARIOS:
            raise ValueError(f"field 'bc': unknown value {self.bc!r}")
        self.lc = _as_list(self.lc, "lc")
        self.mu_c = _as_list(self.mu_c, "mu_c")
        self.sizes = [int(v) for v in _as_list(self.sizes, "sizes", allow_empty=True)]
        layer = self.scenario == "cantilever-rmm" and self.bc == "cc-whole-boundary"
        self.grid = tuple(int(v) for v in (self.grid or (CANTILEVER_GRID if layer else BEAM_GRID)))
        if self.n < 1:
            raise ValueError("field 'n': must be >= 1")
        if self.cell not in CELL_NAMES:
            raise ValueError(f"field 'cell': expected one of {', '.join(CELL_NAMES)}")
        if self.refinement < 1:
            raise ValueError("field 'refinement': must be >= 1")

    def _coerce(self, name, kind):
        v = getattr(self, name)
        try:
            if isinstance(v, bool) or (kind is int and float(v) != int(v)):
                raise ValueError
            setattr(self, name, kind(v))
        except (TypeError, ValueError):
            raise ValueError(f"field {name!r}: expected {kind.__name__}, got {v!r}") from None

    @property
    def variant(self) -> int:
        return CELL_NAMES.index(self.cell) + 1

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        names = {f.name for f in fields(cls)}
        for key in data:
            if key not in names:
                raise ValueError(f"unknown config field {key!r}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be an object")
        return cls.from_dict(data)


def _as_list(v, name, allow_empty=False):
    if isinstance(v, (int, float)):
        v = [v]
    try:
        v = [float(x) for x in v]
    except (TypeError, ValueError):
        raise ValueError(f"field {name!r}: expected a number or a list of numbers") from None
    if not v and not allow_empty:
        raise ValueError(f"field {name!r}: sweep list must not be empty")
    return v


# -- results ------------------------------------------------------------------

CSV_FIELDS = (
    "scenario", "n", "loading", "bc", "candidate", "Lc", "mu_c",
    "D", "D_alt", "D_ratio", "kappa_fit", "moment", "energy", "energy_ratio",
    "T_ratio", "w_ratio",
)


@dataclass
class SweepRow:
    scenario: str
    n: int = 1
    loading: str = ""
    bc: str = ""
    candidate: str = ""
    Lc: float = float("nan")
    mu_c: float = float("nan")
    D: float = float("nan")
    D_alt: float = float("nan")
    D_ratio: float = float("nan")
    kappa_fit: float = float("nan")
    moment: float = float("nan")
    energy: float = float("nan")
    energy_ratio: float = float("nan")
    T_ratio: float = float("nan")
    w_ratio: float = float("nan")


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: v for k, v in asdict(r).items()})
        return path


def _dump(sol: SolutionField, vtk):
    if vtk is not None:
        write_solution_vtk(sol, vtk)
    return sol


# -- beam post-processing -----------------------------------------------------


def fit_curvature(nodes, uy, length) -> float:
    """Least-squares curvature of u_y ~ kappa (x^2 - L^2) / 2 over all nodes."""
    phi = (np.asarray(nodes)[:, 0] ** 2 - length**2) / 2
    den = float(phi @ phi)
    if den == 0:
        raise ValueError("degenerate geometry: zero curvature fit denominator")
    return float(np.asarray(uy) @ phi) / den


@dataclass
class BeamResult:
    D: float
    D_alt: float
    kappa_fit: float
    moment: float
    moment_right: float
    w0: float
    energy: float
    solution: SolutionField


def bending_stiffness(sol: SolutionField, length: float) -> BeamResult:
    """Flexural rigidity from the curvature fit and from the end deflection."""
    mesh, dm = sol.mesh, sol.dofmap
    left = mesh.boundary_nodes("left")
    right = mesh.boundary_nodes("right")
    y = mesh.nodes[:, 1]
    r = reactions(sol)
    fx = r[dm.u_dofs(np.arange(mesh.n_nodes), 0)]
    # external x-forces on the ends: support reactions plus applied loads
    f_applied = sol.system.f[dm.u_dofs(np.arange(mesh.n_nodes), 0)]
    ext = fx + f_applied
    moment = float(y[left] @ ext[left])
    moment_right = -float(y[right] @ ext[right])
    k = fit_curvature(mesh.nodes, sol.u[:, 1], length)
    w0 = float(sol.u[left, 1].mean())
    return BeamResult(moment / k, -moment * length**2 / (2 * w0), k, moment, moment_right, w0, total_energy(sol), sol)


# -- penalty scaling ----------------------------------------------------------


def penalty_parameter(mat: RmmMaterial, h: float) -> float:
    """kappa1 about three orders above elastic and curvature stiffness."""
    c = max(np.abs(mat.C_e.matrix).max(), np.abs(mat.C_micro.matrix).max())
    return PENALTY_FACTOR * (c * h + mat.curvature_modulus / h)


def _mean_edge_length(mesh, line3):
    return float(np.linalg.norm(mesh.nodes[line3[:, 1]] - mesh.nodes[line3[:, 0]], axis=1).mean())


def _cc_tags(bc: str, problem: str):
    """(penalised tags, mask) for a coupling scenario."""
    if bc == "cc-both-ends":
        return ["left", "right"], (1, 1)
    if bc == "cc-left-only":
        return ["left"], (1, 1)
    if bc == "cc-right-only":
        return ["right"], (1, 1)
    if bc == "cc-none":
        return [], (1, 1)
    if bc == "cc-whole-boundary":
        return (["left", "top", "bottom"] if problem == "cantilever" else ["left", "right", "top", "bottom"]), (1, 1)
    if bc == "cc-partial-y":
        return ["left", "top", "bottom"], (0, 1)
    raise ValueError(f"unknown coupling scenario {bc!r}")


def apply_coupling(mesh, dm, K, mat, tags, mask, kappa1=None):
    """Consistent coupling on ``tags``.

    ``kappa1=None`` eliminates the condition exactly; a number adds the
    penalty with that modulus and ``"auto"`` uses :func:`penalty_parameter`.
    Returns (K, penalty records, constraints).
    """
    penalties, cs = [], ConstraintSet()
    for tag in tags:
        line3 = mesh.boundary[tag]
        if kappa1 is None:
            cs = cs.merge(consistent_coupling_constraints(mesh, dm, tag, mask))
            continue
        k1 = penalty_parameter(mat, _mean_edge_length(mesh, line3)) if kappa1 == "auto" else float(kappa1)
        K = K + assemble_consistent_coupling_penalty(mesh, dm, tag, k1, mask)
        penalties.append((line3, k1, mask))
    return K, penalties, cs


# -- bending ------------------------------------------------------------------


def _bending_constraints(mesh, dm, loading, kappa, length, height, tbar):
    left = mesh.boundary_nodes("left")
    right = mesh.boundary_nodes("right")
    cs = ConstraintSet().fix(dm.u_dofs(left, 0), 0.0)
    mid = right[np.argmin(np.abs(mesh.nodes[right, 1]))]
    if abs(mesh.nodes[mid, 1]) > 1e-9 * height:
        raise ValueError("no node at the midpoint of the right edge")
    cs.fix(dm.u_dofs(mid, 1), 0.0)
    f = np.zeros(dm.n_dofs)
    if loading == "rotation":
        cs.fix(dm.u_dofs(right, 0), -kappa * length * mesh.nodes[right, 1])
    else:
        f = apply_traction(mesh, dm, "right", lambda x: np.stack([-2 * tbar * x[..., 1] / height, 0 * x[..., 1]], -1))
    return cs, f


def bending_resolved(n: int, loading="rotation", refinement=2, kappa=1.0, tbar=1e9, materials=None, mesh=None,
                     vtk=None) -> BeamResult:
    """Fully resolved two-phase beam of n cells over the height."""
    mesh = mesh or build_beam_mesh(n, UnitCellSpec(CELL_L, CELL_D, 1, refinement))
    materials = materials or phase_tensors()
    H, L = n * CELL_L, SLENDERNESS * n * CELL_L
    dm = DofMap(mesh)
    K = assemble_elasticity(mesh, materials, dm)
    cs, f = _bending_constraints(mesh, dm, loading, kappa, L, H, tbar)
    return bending_stiffness(_dump(solve(SystemMatrix(K, f, dm, cs, materials)), vtk), L)


def rmm_beam_mesh(height=2 * CELL_L, grid=(48, 4), y_grading=1.0) -> Mesh2D:
    return build_structured_quad_grid(
        SLENDERNESS * height, height, grid[0], grid[1], origin=(0.0, -height / 2), y_grading=y_grading
    )


def bending_macro(c: CubicParams | VoigtTensor, loading="rotation", height=2 * CELL_L, grid=(48, 4), kappa=1.0, tbar=1e9, mesh=None) -> BeamResult:
    """Classical homogeneous beam on the quad9 grid."""
    mesh = mesh or rmm_beam_mesh(height, grid)
    C = c.voigt() if isinstance(c, CubicParams) else c
    L = SLENDERNESS * height
    dm = DofMap(mesh)
    K = assemble_elasticity(mesh, C, dm)
    cs, f = _bending_constraints(mesh, dm, loading, kappa, L, height, tbar)
    return bending_stiffness(solve(SystemMatrix(K, f, dm, cs, C)), L)


def bending_rmm(
    mat: RmmMaterial,
    loading="rotation",
    bc="cc-both-ends",
    height=2 * CELL_L,
    grid=(48, 4),
    kappa=1.0,
    tbar=1e9,
    mesh=None,
    kappa1=None,
    vtk=None,
) -> BeamResult:
    """Homogeneous relaxed micromorphic beam."""
    mesh = mesh or rmm_beam_mesh(height, grid)
    L = SLENDERNESS * height
    dm = DofMap(mesh, with_P=True)
    K = assemble_rmm(mesh, mat, dm)
    tags, mask = _cc_tags(bc, "bending")
    K, penalties, cc = apply_coupling(mesh, dm, K, mat, tags, mask, kappa1)
    cs, f = _bending_constraints(mesh, dm, loading, kappa, L, height, tbar)
    cs = cs.merge(cc)
    return bending_stiffness(_dump(solve(SystemMatrix(K.tocsr(), f, dm, cs, mat, penalties)), vtk), L)


def rmm_material(params: IdentifiedParams, candidate: str, Lc=0.0, mu_c=0.0, n_scale=1.0, mu_curv=None) -> RmmMaterial:
    if candidate not in params.C_micro:
        raise KeyError(f"candidate {candidate!r} not in the identification report")
    cm = params.C_micro[candidate].voigt()
    return RmmMaterial(
        params.C_e[candidate], cm, mu_c=mu_c, mu_curv=params.C_macro.mu if mu_curv is None else mu_curv, Lc=Lc, n_scale=n_scale
    )


def d_macro(c: CubicParams, height: float) -> float:
    return plane_strain_bending_modulus(c) * height**3 / 12


# -- shear --------------------------------------------------------------------


def _shear_bc(mesh, dm, a):
    return dirichlet_u(dm, mesh.boundary_nodes("boundary"), lambda x: np.stack([a * x[:, 1], 0 * x[:, 1]], -1))


def shear_force(sol: SolutionField, a: float, height: float) -> float:
    """Shear force conjugate to the amplitude a.

    All boundary data scale with a, so the work of every reaction (those of
    the prescribed P traces included) is 2 Pi; dividing by a H gives the
    force on a top edge of the stripe.  The displacement reactions alone
    miss the micro stress carried through the P traces.
    """
    return 2 * strain_energy(sol) / (a * height)


def shear_macro(c: CubicParams, a=1e-3, height=2 * CELL_L, grid=(48, 4), mesh=None) -> float:
    mesh = mesh or rmm_beam_mesh(height, grid)
    dm = DofMap(mesh)
    C = c.voigt()
    K = assemble_elasticity(mesh, C, dm)
    return shear_force(solve(SystemMatrix(K, np.zeros(dm.n_dofs), dm, _shear_bc(mesh, dm, a), C)), a, height)


def shear_rmm(mat: RmmMaterial, a=1e-3, height=2 * CELL_L, grid=(48, 4), mesh=None, vtk=None) -> float:
    """Simple shear with the coupling condition imposed on the whole boundary."""
    mesh = mesh or rmm_beam_mesh(height, grid)
    dm = DofMap(mesh, with_P=True)
    K = assemble_rmm(mesh, mat, dm)
    G = np.array([[0.0, a], [0.0, 0.0]])
    cs = _shear_bc(mesh, dm, a).merge(apply_dirichlet_P_tangential(mesh, dm, "boundary", G))
    return shear_force(_dump(solve(SystemMatrix(K, np.zeros(dm.n_dofs), dm, cs, mat)), vtk), a, height)


def shear_resolved(n: int, a=1e-3, refinement=2, materials=None, vtk=None) -> tuple[float, float]:
    """Shear force of a resolved stripe and its length."""
    mesh = build_beam_mesh(n, UnitCellSpec(CELL_L, CELL_D, 1, refinement))
    materials = materials or phase_tensors()
    dm = DofMap(mesh)
    K = assemble_elasticity(mesh, materials, dm)
    sol = _dump(solve(SystemMatrix(K, np.zeros(dm.n_dofs), dm, _shear_bc(mesh, dm, a), materials)), vtk)
    return shear_force(sol, a, n * CELL_L), SLENDERNESS * n * CELL_L


def t_macro(c: CubicParams, a: float, length: float) -> float:
    return a * c.mu_star * length


# -- cantilever ---------------------------------------------------------------


def _cantilever_setup(mesh, dm, tbar):
    right = mesh.boundary_nodes("right")
    cs = ConstraintSet().fix(dm.u_dofs(right).ravel(), 0.0)
    f = apply_traction(mesh, dm, "left", lambda x: np.stack([0 * x[..., 0], np.full(x.shape[:-1], tbar)], -1))
    return cs, f


def _tip_deflection(sol):
    return float(sol.u[sol.mesh.boundary_nodes("left"), 1].mean())


def w_macro(c: CubicParams, tbar: float, height: float, length: float) -> float:
    """Slender-beam tip deflection 4 F L^3 / (E~ H^3) with F = tbar H."""
    return 4 * tbar * height * length**3 / (plane_strain_bending_modulus(c) * height**3)


def cantilever_macro(c: CubicParams, tbar=1e9, height=2 * CELL_L, grid=(48, 4), mesh=None) -> float:
    mesh = mesh or rmm_beam_mesh(height, grid)
    dm = DofMap(mesh)
    C = c.voigt()
    K = assemble_elasticity(mesh, C, dm)
    cs, f = _cantilever_setup(mesh, dm, tbar)
    return _tip_deflection(solve(SystemMatrix(K, f, dm, cs, C)))


def cantilever_grading(mat: RmmMaterial, height: float, ny: int) -> float:
    """Row grading for whole-boundary coupling.

    Coupling the full tangential trace on the free edges makes a layer of
    width about Lc / n there; a uniform row height above that width costs
    an O(h / H) error.  The edge rows shrink toward the layer width, at
    most by CANTILEVER_GRADING.  Large Lc keeps uniform rows, which also
    avoids thin elements where the curvature term dominates conditioning.
    """
    width = mat.Lc / mat.n_scale
    if width <= 0:
        return CANTILEVER_GRADING
    return float(np.clip(height / ny / width, 1.0, CANTILEVER_GRADING))


def cantilever_rmm(mat: RmmMaterial, bc="cc-whole-boundary", tbar=1e9, height=2 * CELL_L, grid=None, mesh=None,
                   kappa1=None, y_grading=None, vtk=None):
    """Returns (tip deflection, potential energy)."""
    if mesh is None:
        grid = tuple(grid or (CANTILEVER_GRID if bc == "cc-whole-boundary" else BEAM_GRID))
        if y_grading is None:
            y_grading = cantilever_grading(mat, height, grid[1]) if bc == "cc-whole-boundary" else 1.0
        mesh = rmm_beam_mesh(height, grid, y_grading)
    dm = DofMap(mesh, with_P=True)
    K = assemble_rmm(mesh, mat, dm)
    tags, mask = _cc_tags(bc, "cantilever")
    K, penalties, cc = apply_coupling(mesh, dm, K, mat, tags, mask, kappa1)
    cs, f = _cantilever_setup(mesh, dm, tbar)
    cs = cs.merge(apply_dirichlet_P_tangential(mesh, dm, "right", np.zeros((2, 2)))).merge(cc)
    sol = _dump(solve(SystemMatrix(K.tocsr(), f, dm, cs, mat, penalties)), vtk)
    return _tip_deflection(sol), total_energy(sol)


def cantilever_resolved(n: int, tbar=1e9, refinement=2, materials=None, vtk=None) -> float:
    mesh = build_beam_mesh(n, UnitCellSpec(CELL_L, CELL_D, 1, refinement))
    materials = materials or phase_tensors()
    dm = DofMap(mesh)
    K = assemble_elasticity(mesh, materials, dm)
    cs, f = _cantilever_setup(mesh, dm, tbar)
    return _tip_deflection(_dump(solve(SystemMatrix(K, f, dm, cs, materials)), vtk))


# -- sweeps -------------------------------------------------------------------


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _vtk_path(cfg: ScenarioConfig, out, n=None, lc=None, mu_c=None):
    if not (cfg.vtk and out):
        return None
    name = f"{cfg.scenario}_n{cfg.n if n is None else n}"
    if lc is not None:
        name += f"_lc{lc:.3e}_muc{mu_c:.3e}"
    return Path(out) / f"{name}.vtk"


def _rmm_jobs(cfg):
    return [(lc, mc) for mc in cfg.mu_c for lc in cfg.lc]


def run_bending_rmm(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    params = params or default_parameters()
    mesh = rmm_beam_mesh(cfg.height, cfg.grid, cfg.y_grading or 1.0)
    ref = d_macro(params.C_macro, cfg.height)

    def one(job):
        lc, mc = job
        mat = rmm_material(params, cfg.candidate, lc, mc, cfg.n, cfg.mu_curv)
        res = bending_rmm(mat, cfg.loading, cfg.bc, cfg.height, cfg.grid, cfg.kappa, cfg.tbar, mesh,
                          vtk=_vtk_path(cfg, out, lc=lc, mu_c=mc))
        return SweepRow("bending-rmm", cfg.n, cfg.loading, cfg.bc, cfg.candidate, lc, mc, res.D, res.D_alt, res.D / ref,
                        res.kappa_fit, res.moment, res.energy)

    return SweepResult(_pmap(one, _rmm_jobs(cfg), threads))


def run_cosserat_limit(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    """Relative energy of the rotation-loaded beam with C_micro = 1000 C_macro."""
    params = params or default_parameters()
    mesh = rmm_beam_mesh(cfg.height, cfg.grid, cfg.y_grading or 1.0)
    e_macro = bending_macro(params.C_macro, "rotation", cfg.height, cfg.grid, cfg.kappa, cfg.tbar, mesh).energy
    ref = d_macro(params.C_macro, cfg.height)

    def one(job):
        lc, mc = job
        mat = rmm_material(params, "cosserat-limit", lc, mc, cfg.n, cfg.mu_curv)
        res = bending_rmm(mat, "rotation", cfg.bc, cfg.height, cfg.grid, cfg.kappa, cfg.tbar, mesh,
                          vtk=_vtk_path(cfg, out, lc=lc, mu_c=mc))
        return SweepRow("bending-rmm", cfg.n, "rotation", cfg.bc, "cosserat-limit", lc, mc, res.D, res.D_alt,
                        res.D / ref, res.kappa_fit, res.moment, res.energy, res.energy / e_macro)

    return SweepResult(_pmap(one, _rmm_jobs(cfg), threads))


def run_bending_resolved(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    params = params or default_parameters()

    def one(n):
        res = bending_resolved(n, cfg.loading, cfg.refinement, cfg.kappa, cfg.tbar, vtk=_vtk_path(cfg, out, n))
        return SweepRow("bending-resolved", n, cfg.loading, D=res.D, D_alt=res.D_alt,
                        D_ratio=res.D / d_macro(params.C_macro, n * CELL_L), kappa_fit=res.kappa_fit,
                        moment=res.moment, energy=res.energy)

    return SweepResult(_pmap(one, cfg.sizes or [cfg.n], threads))


def run_shear(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    params = params or default_parameters()
    if cfg.scenario == "shear-resolved":
        def one(n):
            T, L = shear_resolved(n, cfg.a, cfg.refinement, vtk=_vtk_path(cfg, out, n))
            return SweepRow("shear-resolved", n, T_ratio=T / t_macro(params.C_macro, cfg.a, L))
        return SweepResult(_pmap(one, cfg.sizes or [cfg.n], threads))
    mesh = rmm_beam_mesh(cfg.height, cfg.grid, cfg.y_grading or 1.0)
    L = SLENDERNESS * cfg.height

    def one(job):
        lc, mc = job
        mat = rmm_material(params, cfg.candidate, lc, mc, cfg.n, cfg.mu_curv)
        T = shear_rmm(mat, cfg.a, cfg.height, cfg.grid, mesh, vtk=_vtk_path(cfg, out, lc=lc, mu_c=mc))
        return SweepRow("shear-rmm", cfg.n, "", "cc-whole-boundary", cfg.candidate, lc, mc,
                        T_ratio=T / t_macro(params.C_macro, cfg.a, L))

    return SweepResult(_pmap(one, _rmm_jobs(cfg), threads))


def run_cantilever(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    params = params or default_parameters()
    if cfg.scenario == "cantilever-resolved":
        def one(n):
            w = cantilever_resolved(n, cfg.tbar, cfg.refinement, vtk=_vtk_path(cfg, out, n))
            wm = w_macro(params.C_macro, cfg.tbar, n * CELL_L, SLENDERNESS * n * CELL_L)
            return SweepRow("cantilever-resolved", n, w_ratio=wm / w)
        return SweepResult(_pmap(one, cfg.sizes or [cfg.n], threads))
    wm = w_macro(params.C_macro, cfg.tbar, cfg.height, SLENDERNESS * cfg.height)

    def one(job):
        lc, mc = job
        mat = rmm_material(params, cfg.candidate, lc, mc, cfg.n, cfg.mu_curv)
        w, e = cantilever_rmm(mat, cfg.bc, cfg.tbar, cfg.height, cfg.grid, y_grading=cfg.y_grading,
                              vtk=_vtk_path(cfg, out, lc=lc, mu_c=mc))
        return SweepRow("cantilever-rmm", cfg.n, "", cfg.bc, cfg.candidate, lc, mc, energy=e, w_ratio=wm / w)

    return SweepResult(_pmap(one, _rmm_jobs(cfg), threads))


def run_scenario(cfg: ScenarioConfig, params: IdentifiedParams | None = None, threads=1, out=None) -> SweepResult:
    """Dispatch a sweep; VTK files go to ``out`` when ``cfg.vtk`` is set."""
    if not cfg.scenario.endswith("resolved"):
        known = (params or default_parameters()).C_micro
        if cfg.candidate not in known:
            raise ValueError(f"field 'candidate': {cfg.candidate!r} not in the identification report "
                             f"(have {', '.join(known)})")
    if cfg.scenario == "bending-rmm":
        if cfg.candidate == "cosserat-limit":
            return run_cosserat_limit(cfg, params, threads, out)
        return run_bending_rmm(cfg, params, threads, out)
    if cfg.scenario == "bending-resolved":
        return run_bending_resolved(cfg, params, threads, out)
    if cfg.scenario.startswith("shear"):
        return run_shear(cfg, params, threads, out)
    if cfg.scenario.startswith("cantilever"):
        return run_cantilever(cfg, params, threads, out)
    raise ValueError(f"scenario {cfg.scenario!r} is not a sweep")
