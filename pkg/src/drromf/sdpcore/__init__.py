"""Small solver-agnostic SDP layer with Clarabel and CVXOPT backends."""

from .expr import Affine, Variable, bmat, constant, hstack, vstack
from .program import PsdBlock, SdpError, SemidefiniteProgram, StandardForm
from .solve import (DEFAULT_TOL, INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, SdpSolution, solve,
                    solve_standard_form)
from .sdpa import export_standard_form, parse_standard_form, read_standard_form, write_standard_form

__all__ = [
    "Affine", "Variable", "bmat", "constant", "hstack", "vstack",
    "PsdBlock", "SdpError", "SemidefiniteProgram", "StandardForm",
    "DEFAULT_TOL", "INFEASIBLE", "NUMERICAL_FAILURE", "OPTIMAL", "SdpSolution",
    "solve", "solve_standard_form",
    "export_standard_form", "parse_standard_form", "read_standard_form", "write_standard_form",
]
