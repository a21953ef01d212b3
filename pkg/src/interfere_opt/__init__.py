"""Optimal and efficient block designs under neighbor-interference models."""

from .errors import (CapacityError, ConvergenceError, DegenerateMeasureError, InterfereOptError,
                     InvalidCovarianceError, InvalidInputError)
from .exact import ExactDesign, efficiencies, exact_search, info_matrix
from .model import CovarianceSpec, ModelKind, build_kernel, moments_for
from .sequences import SymmetricBlock, canonicalize, enumerate_blocks
from .solver import (AlgorithmConfig, Measure, closed_form, optimize_measure, solve, solve_proportions,
                     verify_measure)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig", "CapacityError", "ConvergenceError", "CovarianceSpec", "DegenerateMeasureError",
    "ExactDesign", "InterfereOptError", "InvalidCovarianceError", "InvalidInputError", "Measure", "ModelKind",
    "SymmetricBlock", "build_kernel", "canonicalize", "closed_form", "efficiencies", "enumerate_blocks",
    "exact_search", "info_matrix", "moments_for", "optimize_measure", "solve", "solve_proportions",
    "verify_measure",
]
