"""Decoding solutions, detecting the gamma mismatch and the refinement loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from ctxmaxsat.core import Clause, Dataset, MaxSatModel
from ctxmaxsat.milp.encoding import (
    MilpProblem,
    Violation,
    a_var,
    add_refinement,
    build_encoding,
    literals,
)
from ctxmaxsat.milp.solvers import MilpSolution, solve
from ctxmaxsat.solver import VALUE_TOL, evaluate, is_feasible
from ctxmaxsat.solver import solve as solve_maxsat

log = logging.getLogger(__name__)

WEIGHT_DIGITS = 6


class DecodeError(KeyError):
    pass


def decode(problem: MilpProblem, solution: dict[str, float],
           tolerance: float | None = None) -> MaxSatModel:
    """Read clauses, hard flags and weights off a solution.

    A soft weight below ``3 * epsilon`` with its zero flag set becomes 0 (kept
    as a soft clause, with a warning). Other weights are clamped to [0, 1] and
    rounded to ``WEIGHT_DIGITS`` decimals to drop solver noise.
    """
    eps = problem.epsilon if tolerance is None else tolerance
    need = [a_var(j, lit) for j in range(problem.m) for lit in literals(problem.n)]
    need += [f"{f}_{j}" for j in range(problem.m) for f in ("c", "w", "wz")]
    missing = [v for v in need if v not in solution]
    if missing:
        raise DecodeError(f"solution lacks {len(missing)} model variables, e.g. {missing[0]}")
    clauses, hard, weights = [], [], []
    for j in range(problem.m):
        lits = [lit for lit in literals(problem.n) if solution[a_var(j, lit)] > 0.5]
        clauses.append(Clause(frozenset(lits)))  # empty clause -> StructureError
        h = solution[f"c_{j}"] > 0.5
        hard.append(h)
        w = float(solution[f"w_{j}"])
        if h:
            w = 0.0
        elif solution[f"wz_{j}"] > 0.5 and w < 3 * eps:
            log.warning("clause %d decoded as a zero-weight soft clause", j)
            w = 0.0
        else:
            w = round(min(1.0, max(0.0, w)), WEIGHT_DIGITS)
        weights.append(w)
    return MaxSatModel(problem.n, tuple(clauses), tuple(hard), tuple(weights))


def detect_mismatch(model: MaxSatModel, data: Dataset) -> list[Violation]:
    """Positives that the model's true optimum in their context beats.

    For every such positive the violation carries the context optimum ``x'``
    (lowest assignment among ties) and the positive ``x+``.
    """
    out = []
    cache = {}
    for k, ex in enumerate(data.examples):
        if not ex.label:
            continue
        psi = ex.context
        if psi not in cache:
            cache[psi] = solve_maxsat(model, psi)
        res = cache[psi]
        if not res.feasible:
            log.warning("context %s infeasible for a decoded model; skipping", psi.to_ints())
            continue
        if not is_feasible(model, psi, ex.assignment):
            log.warning("positive %d is infeasible for the decoded model; no value cut applies", k)
            continue
        if res.value > evaluate(model, ex.assignment) + VALUE_TOL:
            out.append(Violation(psi, res.witness, ex.assignment, k))
    return out


def refine(problem: MilpProblem, violations: list[Violation]) -> MilpProblem:
    """A copy of ``problem`` with one disjunctive cut per violation."""
    out = problem.copy()
    for v in violations:
        add_refinement(out, v)
    return out


@dataclass
class MilpResult:
    model: MaxSatModel | None
    problem: MilpProblem
    solution: MilpSolution | None
    rounds: int
    violations: list[list[Violation]] = field(default_factory=list)
    status: str = "optimal"


def learn_milp(data: Dataset, m: int, backend: str | Callable = "auto", max_rounds: int = 3,
               **solver_kwargs) -> MilpResult:
    """Build, solve, decode, and refine until no mismatch remains or ``max_rounds`` is spent."""
    problem = build_encoding(data, m)
    history: list[list[Violation]] = []
    rounds = 0
    while True:
        if callable(backend):
            sol = backend(problem, **solver_kwargs)
        else:
            sol = solve(problem, backend, **solver_kwargs)
        if sol is None:
            return MilpResult(None, problem, None, rounds, history, "infeasible")
        model = decode(problem, sol.values)
        found = detect_mismatch(model, data)
        history.append(found)
        if not found:
            return MilpResult(model, problem, sol, rounds, history, "optimal")
        if rounds >= max_rounds:
            return MilpResult(model, problem, sol, rounds, history, "mismatch")
        problem = refine(problem, found)
        rounds += 1


__all__ = ["DecodeError", "MilpResult", "decode", "detect_mismatch", "learn_milp", "refine"]
