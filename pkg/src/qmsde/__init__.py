"""Strong approximation of scalar SDEs with piecewise-smooth, possibly discontinuous drift.

Quasi-Milstein and Euler-Maruyama schemes, the jump-removing bump transform
and a Monte-Carlo harness for empirical strong convergence orders.
"""

from .brownian import BrownianLattice, coarsen, generate_path, generate_paths
from .catalog import get_problem, list_problems
from .piecewise import AffinePiece, CatalogPiece, PiecewiseFunction, SDEProblem
from .schemes import SchemePath, continuous_value, invert_transformed, simulate
from .study import ConvergenceOrderRegressor, StudyConfig, StudyReport, rate_fit, run_study, strong_error
from .transform import DriftJumpTransformer, TransformParams, TransformedSDE, transformed_problem

__version__ = "0.1.0"

__all__ = [
    "AffinePiece",
    "BrownianLattice",
    "CatalogPiece",
    "ConvergenceOrderRegressor",
    "DriftJumpTransformer",
    "PiecewiseFunction",
    "SDEProblem",
    "SchemePath",
    "StudyConfig",
    "StudyReport",
    "TransformParams",
    "TransformedSDE",
    "coarsen",
    "continuous_value",
    "generate_path",
    "generate_paths",
    "get_problem",
    "invert_transformed",
    "list_problems",
    "rate_fit",
    "run_study",
    "simulate",
    "strong_error",
    "transformed_problem",
]
