"""Viscosity solutions of fully nonlinear elliptic and parabolic equations on box grids."""

from .boundary import BoundarySpec, Dirichlet, Oblique, StateConstraint
from .core import EvaluationError, Grid, GridFn, Jet, OperatorSpec, SymMatrix, check_proper
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundarySpec",
    "Dirichlet",
    "EvaluationError",
    "Grid",
    "GridFn",
    "Jet",
    "Oblique",
    "OperatorSpec",
    "StateConstraint",
    "SymMatrix",
    "check_proper",
]
