"""Exact contextual MAX-SAT solving by enumeration.

This is the oracle layer shared by the learners, the data generator and the
evaluator: optimum values and sets within a context, the MAX-SAT classifier,
and model counting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ctxmaxsat import kernels
from ctxmaxsat.core import (
    TOP,
    Assignment,
    Clause,
    Context,
    MaxSatModel,
    StructureError,
)

log = logging.getLogger(__name__)

ENUMERATION_LIMIT = 20
VALUE_TOL = 1e-9
SUBSET_LIMIT = 20


class CapacityError(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


class InfeasibleModelError(ValueError):
    pass


@dataclass(frozen=True)
class SolveResult:
    feasible: bool
    value: float
    witness: Assignment | None = None


def _check(model: MaxSatModel, psi: Context, limit: int | None):
    cap = ENUMERATION_LIMIT if limit is None else limit
    if model.n > cap:
        raise CapacityError(f"n={model.n} exceeds the enumeration limit {cap}")
    if psi.max_var > model.n:
        raise StructureError(f"context {psi.to_ints()} out of range for n={model.n}")


def evaluate(model: MaxSatModel, a: Assignment) -> float:
    """Total weight of the soft clauses satisfied by ``a``."""
    if a.n != model.n:
        raise StructureError(f"assignment has n={a.n}, model has n={model.n}")
    return sum(w for c, h, w in zip(model.clauses, model.hard, model.weights)
               if not h and c.satisfied_by(a))


def is_feasible(model: MaxSatModel, psi: Context, a: Assignment) -> bool:
    if a.n != model.n:
        raise StructureError(f"assignment has n={a.n}, model has n={model.n}")
    return psi.satisfied_by(a) and all(c.satisfied_by(a) for c in model.hard_clauses())


def solve(model: MaxSatModel, psi: Context = TOP, limit: int | None = None) -> SolveResult:
    """Best feasible assignment within ``psi``; ties go to the lowest bitset."""
    _check(model, psi, limit)
    value, wit, _ = kernels.best(*kernels.pack_model(model), psi.fixed_mask, psi.fixed_value,
                                 model.n, VALUE_TOL)
    if wit < 0:
        return SolveResult(False, 0.0, None)
    return SolveResult(True, value, Assignment(model.n, int(wit)))


def optimum_values(model: MaxSatModel, psi: Context = TOP, limit: int | None = None,
                   max_count: int = -1) -> list[int]:
    """Optimal assignments as raw bitsets, in enumeration order."""
    _check(model, psi, limit)
    return kernels.optima(*kernels.pack_model(model), psi.fixed_mask, psi.fixed_value,
                          model.n, VALUE_TOL, max_count)


def optimum_set(model: MaxSatModel, psi: Context = TOP,
                limit: int | None = None) -> frozenset[Assignment]:
    return frozenset(Assignment(model.n, int(v)) for v in optimum_values(model, psi, limit))


def classify(model: MaxSatModel, psi: Context, a: Assignment, limit: int | None = None) -> bool:
    """The MAX-SAT classifier: is ``a`` feasible and optimal in ``psi``?

    An infeasible context has no optima, so every assignment is negative there.
    """
    if not psi.satisfied_by(a):
        log.warning("classify: %r does not satisfy context %r; returning False", a, psi)
        return False
    if not is_feasible(model, psi, a):
        return False
    res = solve(model, psi, limit)
    return res.feasible and evaluate(model, a) >= res.value - VALUE_TOL


def model_count(clauses: Sequence[Clause], psi: Context, n: int,
                limit: int | None = None) -> int:
    """Number of assignments over ``n`` variables satisfying all clauses and ``psi``."""
    cap = ENUMERATION_LIMIT if limit is None else limit
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration limit {cap}")
    pos, neg = kernels.pack_clauses(list(clauses))
    return int(kernels.count(pos, neg, psi.fixed_mask, psi.fixed_value, n))


# ---------------------------------------------------------------------------
# optimal-region formula


@dataclass(frozen=True)
class OptimalRegion:
    """Global optima of a model as hard clauses plus exact soft-satisfaction patterns.

    An assignment belongs to the region iff it satisfies ``hard`` and, for some
    subset in ``optimal_subsets``, satisfies exactly those soft clauses (by
    index into ``soft``) and falsifies the remaining soft clauses.
    """

    n: int
    hard: tuple[Clause, ...]
    soft: tuple[Clause, ...]
    soft_index: tuple[int, ...]
    optimal_subsets: tuple[frozenset[int], ...]
    value: float

    def cubes(self):
        """Yield ``(clauses, context)`` pairs partitioning the region.

        Falsifying a clause fixes all its literals to false, so each subset
        becomes a clause set plus a partial assignment; inconsistent ones are
        skipped (their count is zero).
        """
        for subset in self.optimal_subsets:
            fixed = set()
            for j, c in zip(self.soft_index, self.soft):
                if j not in subset:
                    fixed.update(-lit for lit in c.literals)
            if any(-lit in fixed for lit in fixed):
                continue
            chosen = [c for j, c in zip(self.soft_index, self.soft) if j in subset]
            yield list(self.hard) + chosen, Context(frozenset(fixed))

    def contains(self, a: Assignment) -> bool:
        if not all(c.satisfied_by(a) for c in self.hard):
            return False
        sat = frozenset(j for j, c in zip(self.soft_index, self.soft) if c.satisfied_by(a))
        return sat in set(self.optimal_subsets)

    def count(self, extra_hard: Sequence[Clause] = ()) -> int:
        return sum(model_count([*cl, *extra_hard], ctx, self.n) for cl, ctx in self.cubes())


def optimal_region_formula(model: MaxSatModel) -> OptimalRegion:
    """Soft-index subsets whose weight sum equals the global optimum value."""
    soft_idx = model.soft_indices()
    if len(soft_idx) > SUBSET_LIMIT:
        raise CapacityError(f"{len(soft_idx)} soft clauses exceed the subset limit {SUBSET_LIMIT}")
    res = solve(model, TOP)
    if not res.feasible:
        raise InfeasibleModelError("model has no feasible assignment")
    sums = np.zeros(1)
    for j in soft_idx:
        sums = np.concatenate([sums, sums + model.weights[j]])
    hits = np.flatnonzero(np.abs(sums - res.value) <= VALUE_TOL)
    subsets = tuple(
        frozenset(soft_idx[b] for b in range(len(soft_idx)) if (int(h) >> b) & 1) for h in hits
    )
    return OptimalRegion(
        model.n,
        tuple(model.hard_clauses()),
        tuple(model.clauses[j] for j in soft_idx),
        tuple(soft_idx),
        subsets,
        res.value,
    )


def all_assignments(n: int, psi: Context = TOP):
    """Every assignment satisfying ``psi``, in enumeration order."""
    for v in range(1 << n):
        if (v & psi.fixed_mask) == psi.fixed_value:
            yield Assignment(n, v)


def random_assignment(n: int, psi: Context, rng: np.random.Generator) -> Assignment:
    bits = int(rng.integers(0, 1 << n)) if n else 0
    return Assignment(n, (bits & ~psi.fixed_mask) | psi.fixed_value)


__all__ = [
    "CapacityError",
    "InfeasibleModelError",
    "OptimalRegion",
    "SolveResult",
    "all_assignments",
    "classify",
    "evaluate",
    "is_feasible",
    "model_count",
    "optimal_region_formula",
    "optimum_set",
    "optimum_values",
    "random_assignment",
    "solve",
]
