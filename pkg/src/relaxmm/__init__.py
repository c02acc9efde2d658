"""Relaxed micromorphic plane-strain finite elements for metamaterial beams.

Submodules: ``elements`` (Q2, T2 and second-order Nedelec bases), ``mesh``,
``materials``, ``assembly``, ``solve``, ``identify`` and ``experiments``.
"""

from .assembly import ConstraintSet, DofMap, assemble_elasticity, assemble_rmm
from .materials import GPa, CubicParams, IsotropicParams, RmmMaterial, VoigtTensor, reuss_ce
from .mesh import Mesh2D, UnitCellSpec, build_beam_mesh, build_structured_quad_grid, build_unit_cell_mesh
from .solve import SolutionField, SolverError, SystemMatrix, solve

__version__ = "0.1.0"

__all__ = [
    "ConstraintSet", "CubicParams", "DofMap", "GPa", "IsotropicParams", "Mesh2D", "RmmMaterial",
    "SolutionField", "SolverError", "SystemMatrix", "UnitCellSpec", "VoigtTensor", "assemble_elasticity",
    "assemble_rmm", "build_beam_mesh", "build_structured_quad_grid", "build_unit_cell_mesh", "reuss_ce", "solve",
]
