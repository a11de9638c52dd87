"""Least-energy sign-changing states of a fractional Kirchhoff equation on a grid."""

__version__ = "0.1.0"

from .discretization import Field, Grid, build_kernel, make_grid
from .errors import BracketFailure, ConvergenceError, FaceSignViolation, MaxIters, NoConvergence, PartCollapse
from .functional import Problem, energy, pairing, residual
from .model import ModelParams, NonlinearitySpec, PotentialSpec, load_config, validate_params
from .nehari import miranda_solve, pair_project, scalar_project
from .solver import SolverConfig, SolveResult, minimize_ground, minimize_nodal, verify_critical

__all__ = [
    "BracketFailure", "ConvergenceError", "FaceSignViolation", "Field", "Grid", "MaxIters", "ModelParams",
    "NoConvergence", "NonlinearitySpec", "PartCollapse", "PotentialSpec", "Problem", "SolveResult",
    "SolverConfig", "build_kernel", "energy", "load_config", "make_grid", "minimize_ground", "minimize_nodal",
    "miranda_solve", "pair_project", "pairing", "residual", "scalar_project", "validate_params",
    "verify_critical",
]
