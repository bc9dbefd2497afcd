"""Brute-force reference implementations used as test oracles.

Everything here works on plain tuples of 0/1 values and signed-int clause
lists, sharing no code with the package's bitset kernels.
"""

from __future__ import annotations

from itertools import product

TOL = 1e-9


def lit_true(x: tuple[int, ...], lit: int) -> bool:
    v = x[abs(lit) - 1]
    return v == 1 if lit > 0 else v == 0


def clause_true(x, lits) -> bool:
    return any(lit_true(x, l) for l in lits)


def context_true(x, ctx) -> bool:
    return all(lit_true(x, l) for l in ctx)


def raw(model):
    """``(n, [(lits, hard, weight)])`` from a package model."""
    return model.n, [(c.to_ints(), h, w) for c, h, w in zip(model.clauses, model.hard,
                                                            model.weights)]


def value(model, x) -> float:
    _, cls = raw(model)
    return sum(w for lits, h, w in cls if not h and clause_true(x, lits))


def feasible(model, ctx, x) -> bool:
    _, cls = raw(model)
    return context_true(x, ctx) and all(clause_true(x, lits) for lits, h, _ in cls if h)


def points(n: int):
    """All assignments in the package's enumeration order (X1 is the low bit)."""
    for bits in product((0, 1), repeat=n):
        yield tuple(reversed(bits))


def optimum(model, ctx):
    """``(value, sorted list of optima)``; ``(None, [])`` if the context is infeasible."""
    feas = [x for x in points(model.n) if feasible(model, ctx, x)]
    if not feas:
        return None, []
    best = max(value(model, x) for x in feas)
    return best, [x for x in feas if value(model, x) >= best - TOL]


def classify(model, ctx, x) -> bool:
    return x in optimum(model, ctx)[1]


def count(n, clauses, ctx) -> int:
    return sum(1 for x in points(n)
               if context_true(x, ctx) and all(clause_true(x, c) for c in clauses))
