"""Upper bounds on the time a polynomial system spends in an unsafe set.

The bounds come from a hierarchy of moment relaxations over occupation
measures; a simulation oracle provides ground truth for checking them.
"""

from .polyalg import Polynomial, parse_inequality, parse_poly
from .problem import (
    Dirac,
    RawMoments,
    SafetyProblem,
    ScalingRecord,
    UniformBox,
    normalize,
    validate,
)
from .relaxation import assemble_primal, solve_relaxation, verify_certificate
from .solver import Solution, SolverOptions, Status, solve

__version__ = "0.1.0"

__all__ = [
    "Dirac",
    "Polynomial",
    "RawMoments",
    "SafetyProblem",
    "ScalingRecord",
    "Solution",
    "SolverOptions",
    "Status",
    "UniformBox",
    "assemble_primal",
    "normalize",
    "parse_inequality",
    "parse_poly",
    "solve",
    "solve_relaxation",
    "validate",
    "verify_certificate",
]
