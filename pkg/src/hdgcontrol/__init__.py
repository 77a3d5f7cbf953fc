"""HDG discretization of Dirichlet boundary control for the Poisson equation.

The optimality system (state ``y``, adjoint ``z``, fluxes ``q``, ``p``,
interior traces and boundary control ``u``) is discretized by an HDG method
with ``[P_k]^d`` fluxes, ``P_{k+1}`` scalars and ``P_k`` traces, condensed to
the trace unknowns element by element, and solved globally.
"""
from .errors import ConvergenceReport, compute_eoc, cost_functional, l2_error_boundary, l2_error_volume
from .mesh import Mesh, build_box_mesh, classify_faces, refine
from .solution import HdgSolution, residuals
from .space import SpaceConfig
from .system import assemble_condensed, assemble_monolithic, build_dofmap, solve, solve_forward, solve_monolithic

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "HdgSolution", "Mesh", "SpaceConfig",
    "assemble_condensed", "assemble_monolithic", "build_box_mesh", "build_dofmap",
    "classify_faces", "compute_eoc", "cost_functional", "l2_error_boundary",
    "l2_error_volume", "refine", "residuals", "solve", "solve_forward", "solve_monolithic",
]
