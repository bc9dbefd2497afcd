"""Learning MAX-SAT models by mixed-integer programming."""

from ctxmaxsat.milp.encoding import (
    EPSILON,
    Constraint,
    MilpProblem,
    Var,
    Violation,
    add_refinement,
    build_encoding,
    check_solution,
    complete_from_model,
    expected_family_sizes,
)
from ctxmaxsat.milp.lpformat import LpModel, emit_lp, format_solution, parse_lp, parse_solution
from ctxmaxsat.milp.pipeline import (
    DecodeError,
    MilpResult,
    decode,
    detect_mismatch,
    learn_milp,
    refine,
)
from ctxmaxsat.milp.solvers import (
    EXHAUSTIVE_LIMIT,
    ExternalSolverError,
    MilpSolution,
    solve,
    solve_exhaustive,
    solve_external,
    solve_highs,
)

__all__ = [
    "EPSILON",
    "EXHAUSTIVE_LIMIT",
    "Constraint",
    "DecodeError",
    "ExternalSolverError",
    "LpModel",
    "MilpProblem",
    "MilpResult",
    "MilpSolution",
    "Var",
    "Violation",
    "add_refinement",
    "build_encoding",
    "check_solution",
    "complete_from_model",
    "decode",
    "detect_mismatch",
    "emit_lp",
    "expected_family_sizes",
    "format_solution",
    "learn_milp",
    "parse_lp",
    "parse_solution",
    "refine",
    "solve",
    "solve_exhaustive",
    "solve_external",
    "solve_highs",
]
