"""Hybrid High-Order discretization of stationary incompressible MHD on polyhedral meshes."""

from .assembly import (Discretization, DofLayout, ModelParams, SystemState, assemble_jacobian,
                       assemble_residual, build_layout, infsup_probe, recover_interior,
                       static_condense)
from .basis import CellScalarField, HybridField, MeshBases, interpolate
from .local_ops import LocalOps, build_local_ops
from .mesh import PolyMesh, build_cube_tet_mesh, compute_stats, load_mesh
from .mms import ErrorReport, ExactSolution, compute_errors, exact_sources, mms_params
from .newton import NewtonConfig, SolveReport, solve

__all__ = [
    "CellScalarField", "Discretization", "DofLayout", "ErrorReport", "ExactSolution",
    "HybridField", "LocalOps", "MeshBases", "ModelParams", "NewtonConfig", "PolyMesh",
    "SolveReport", "SystemState", "assemble_jacobian", "assemble_residual", "build_cube_tet_mesh",
    "build_layout", "build_local_ops", "compute_errors", "compute_stats", "exact_sources",
    "infsup_probe", "interpolate", "load_mesh", "mms_params", "recover_interior", "solve",
    "static_condense",
]
