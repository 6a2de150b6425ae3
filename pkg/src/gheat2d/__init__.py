"""Monotone implicit finite-difference solver for the two-dimensional
G-heat equation with uncertain volatilities and sign-uncertain covariance,
plus expectation queries and a benchmark harness.
"""

from ._backend import backend_name
from .core import (
    BoxDiagnostics,
    CoefficientStats,
    Grid,
    IterationReport,
    ProblemSpec,
    SolutionLattice,
    SolverConfig,
    UncertaintyBox,
    make_grid,
    validate_box,
)
from .errors import (
    ConfigError,
    EvaluationError,
    ExpressionError,
    GHeatError,
    IterationCapError,
    LinearSolveError,
    NonNestedGridError,
)
from .gexp import (
    GExpInterval,
    GExpQuery,
    GExpResult,
    default_half_width,
    g_expectation,
    upper_and_lower,
)
from .linsys import (
    CoefficientField,
    MMatrixDiagnostics,
    SolveResult,
    SparseOperator,
    assemble,
    build_coefficients,
    solve,
    validate_m_matrix,
    write_matrix_market,
)
from .stepper import (
    march,
    picard_step,
    scheme_residual,
    verify_comparison,
    verify_monotone_iteration,
)

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "BoxDiagnostics",
    "CoefficientStats",
    "Grid",
    "IterationReport",
    "ProblemSpec",
    "SolutionLattice",
    "SolverConfig",
    "UncertaintyBox",
    "make_grid",
    "validate_box",
    "GHeatError",
    "ConfigError",
    "ExpressionError",
    "EvaluationError",
    "LinearSolveError",
    "IterationCapError",
    "NonNestedGridError",
    "GExpQuery",
    "GExpResult",
    "GExpInterval",
    "default_half_width",
    "g_expectation",
    "upper_and_lower",
    "CoefficientField",
    "SparseOperator",
    "MMatrixDiagnostics",
    "SolveResult",
    "assemble",
    "build_coefficients",
    "solve",
    "validate_m_matrix",
    "write_matrix_market",
    "march",
    "picard_step",
    "scheme_residual",
    "verify_comparison",
    "verify_monotone_iteration",
    "__version__",
]
