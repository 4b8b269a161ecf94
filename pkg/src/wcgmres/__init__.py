"""Worst-case and ideal GMRES for small dense matrices.

Polynomials are written ``p(z; c) = 1 - sum_j c[j-1] z**j`` throughout.
"""
__version__ = "0.1.0"

from .krylov import (DegenerateVectorError, SingularMatrixError, gmres_residual,
                     gmres_residual_complex, min_poly_degree, poly_matrix)
from .matgen import (MatrixFormatError, ParameterError, gen_alternating_bidiagonal,
                     gen_block_coupled, gen_jordan, gen_toh, read_matrix, write_matrix)
from .wcsolver import (CertificationError, WorstCaseConfig, certify_worst_case,
                       solve_worst_case)
from .idealsolver import IdealConfig, equality_certificate, solve_ideal

__all__ = [
    "__version__",
    "DegenerateVectorError",
    "SingularMatrixError",
    "gmres_residual",
    "gmres_residual_complex",
    "min_poly_degree",
    "poly_matrix",
    "MatrixFormatError",
    "ParameterError",
    "gen_alternating_bidiagonal",
    "gen_block_coupled",
    "gen_jordan",
    "gen_toh",
    "read_matrix",
    "write_matrix",
    "CertificationError",
    "WorstCaseConfig",
    "certify_worst_case",
    "solve_worst_case",
    "IdealConfig",
    "equality_certificate",
    "solve_ideal",
]
