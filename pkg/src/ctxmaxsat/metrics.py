"""Model-quality metrics: global accuracy, infeasibility, regret and the theory checks.

Accuracy and infeasibility have two implementations each. The counting path
builds the optimal-region formula of each model and counts models of cube
conjunctions; the enumeration path compares optimum sets directly. They must
agree exactly and the tests hold them to that.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ctxmaxsat import kernels
from ctxmaxsat.core import TOP, Assignment, Context, Dataset, MaxSatModel, StructureError
from ctxmaxsat.sls import score
from ctxmaxsat.solver import (
    VALUE_TOL,
    InfeasibleModelError,
    OptimalRegion,
    model_count,
    optimal_region_formula,
    optimum_values,
    solve,
)


def _same_n(a: MaxSatModel, b: MaxSatModel) -> None:
    if a.n != b.n:
        raise StructureError(f"models have n={a.n} and n={b.n}")


def _region(model: MaxSatModel) -> OptimalRegion | None:
    try:
        return optimal_region_formula(model)
    except InfeasibleModelError:
        return None


def _intersection_count(r1: OptimalRegion, r2: OptimalRegion) -> int:
    total = 0
    for cl1, ctx1 in r1.cubes():
        for cl2, ctx2 in r2.cubes():
            lits = ctx1.literals | ctx2.literals
            if any(-lit in lits for lit in lits):
                continue
            total += model_count([*cl1, *cl2], Context(lits), r1.n)
    return total


# ---------------------------------------------------------------------------
# accuracy and infeasibility


def global_accuracy(learned: MaxSatModel, truth: MaxSatModel, method: str = "count") -> float:
    """Fraction of all 2^n assignments on which the two global classifiers agree."""
    _same_n(learned, truth)
    total = 1 << truth.n
    if method == "enumerate":
        opt_l = set(optimum_values(learned, TOP))
        opt_t = set(optimum_values(truth, TOP))
        return (total - len(opt_l ^ opt_t)) / total
    if method != "count":
        raise ValueError(f"unknown method {method!r}")
    rl, rt = _region(learned), _region(truth)
    n_l = rl.count() if rl else 0
    n_t = rt.count() if rt else 0
    both = _intersection_count(rl, rt) if rl and rt else 0
    return (total - n_l - n_t + 2 * both) / total


def infeasibility(learned: MaxSatModel, truth: MaxSatModel,
                  method: str = "count") -> tuple[float, list[str]]:
    """Fraction of the learned global optima that violate the truth's hard clauses."""
    _same_n(learned, truth)
    hard = truth.hard_clauses()
    if method == "enumerate":
        opt = optimum_values(learned, TOP)
        if not opt:
            return 1.0, ["learned model has no feasible assignment"]
        xs = np.array(opt, dtype=np.int64)
        _, feas = kernels.evaluate_many(*kernels.pack_model(truth), xs)
        return float(np.count_nonzero(feas == 0)) / len(opt), []
    if method != "count":
        raise ValueError(f"unknown method {method!r}")
    region = _region(learned)
    if region is None:
        return 1.0, ["learned model has no feasible assignment"]
    size = region.count()
    ok = region.count(extra_hard=hard)
    return (size - ok) / size, []


# ---------------------------------------------------------------------------
# regret


@dataclass
class RegretResult:
    mean: float | None
    normalizer: float
    coverage: float
    sample_count: int
    flags: list[str] = field(default_factory=list)


def regret(learned: MaxSatModel, truth: MaxSatModel, k: int = 1000,
           rng: np.random.Generator | None = None, psi: Context = TOP) -> RegretResult:
    """Mean normalised regret over learned optima that the truth deems feasible.

    Up to ``k`` such optima are drawn uniformly without replacement (all of
    them when there are at most ``k``). Each regret is divided by the truth's
    optimum value. Infeasible learned optima are excluded here and show up in
    ``coverage`` instead.
    """
    _same_n(learned, truth)
    rng = rng if rng is not None else np.random.default_rng(0)
    best = solve(truth, psi)
    if not best.feasible:
        raise InfeasibleModelError("ground-truth model is infeasible in the context")
    opt = optimum_values(learned, psi)
    if not opt:
        return RegretResult(None, best.value, 0.0, 0, ["learned model has no optimum"])
    xs = np.array(opt, dtype=np.int64)
    vals, feas = kernels.evaluate_many(*kernels.pack_model(truth), xs)
    keep = np.flatnonzero(feas == 1)
    coverage = len(keep) / len(opt)
    if len(keep) == 0:
        return RegretResult(None, best.value, 0.0, 0,
                            ["no learned optimum is feasible for the ground truth"])
    if len(keep) > k:
        keep = np.sort(rng.choice(keep, size=k, replace=False))
    gaps = best.value - vals[keep]
    flags = []
    if best.value <= VALUE_TOL:
        flags.append("ground-truth optimum value is zero; regret left unnormalised")
        mean = float(gaps.mean())
    else:
        mean = float(gaps.mean() / best.value)
    return RegretResult(max(mean, 0.0), best.value, coverage, len(keep), flags)


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    risk: float
    eta: float
    opt_size: int
    flags: list[str] = field(default_factory=list)


def average_regret(h: MaxSatModel, truth: MaxSatModel, psi: Context,
                   r_max: float) -> tuple[float, int]:
    """Average regret of the optima of ``h`` in ``psi``; infeasible optima cost ``r_max``."""
    opt = optimum_values(h, psi)
    if not opt:
        return math.nan, 0
    best = solve(truth, psi)
    xs = np.array(opt, dtype=np.int64)
    vals, feas = kernels.evaluate_many(*kernels.pack_model(truth), xs)
    regs = np.where(feas == 1, best.value - vals, r_max)
    return float(regs.mean()), len(opt)


def context_risk(h: MaxSatModel, truth: MaxSatModel, psi: Context) -> float:
    """Misclassification rate of ``h`` against ``truth`` under uniform D(x | psi)."""
    opt_h = set(optimum_values(h, psi))
    opt_t = set(optimum_values(truth, psi))
    return len(opt_h ^ opt_t) / (1 << (h.n - len(psi)))


def regret_bound_check(h: MaxSatModel, truth: MaxSatModel, psi: Context = TOP,
                       r_max: float | None = None) -> BoundCheck:
    """Check reg(h, psi) <= (||w*||_1 + r_max) / (eta |opt(psi)|) * L(h) under uniform D."""
    _same_n(h, truth)
    w1 = float(sum(abs(w) for w in truth.weights))
    r_max = w1 if r_max is None else float(r_max)
    eta = 1.0 / (1 << (h.n - len(psi)))
    risk = context_risk(h, truth, psi)
    lhs, size = average_regret(h, truth, psi, r_max)
    if size == 0:
        return BoundCheck(math.nan, math.inf, True, risk, eta, 0,
                          ["h has no optimum in the context"])
    rhs = (w1 + r_max) / (eta * size) * risk
    return BoundCheck(lhs, rhs, lhs <= rhs + 1e-9, risk, eta, size)


# ---------------------------------------------------------------------------
# representativeness


@dataclass
class Representativeness:
    counts: dict[Assignment, int]
    representative: bool

    @property
    def weakest(self) -> tuple[Assignment, int]:
        a = min(self.counts, key=lambda x: (self.counts[x], x))
        return a, self.counts[a]


def representativeness(h: MaxSatModel, h_star: MaxSatModel, contexts: Sequence[Context],
                       target: Context = TOP) -> Representativeness:
    """Count, for each x in the target context, the observed contexts that catch h's error on x."""
    _same_n(h, h_star)
    n = h.n

    def errs(psi: Context) -> set[int]:
        return set(optimum_values(h, psi)) ^ set(optimum_values(h_star, psi))

    target_err = errs(target)
    ctx_err = [errs(c) for c in contexts]
    counts: dict[Assignment, int] = {}
    for v in range(1 << n):
        if (v & target.fixed_mask) != target.fixed_value:
            continue
        wrong = v in target_err
        c = 0
        for psi, e in zip(contexts, ctx_err):
            if (v & psi.fixed_mask) == psi.fixed_value and (not wrong or v in e):
                c += 1
        counts[Assignment(n, v)] = c
    return Representativeness(counts, bool(counts) and min(counts.values()) > 0)


# ---------------------------------------------------------------------------
# composite report


@dataclass
class EvalReport:
    training_score_fraction: float
    global_accuracy: float
    infeasibility: float
    regret_mean: float | None
    regret_normalizer: float
    sample_count: int
    coverage: float
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("training_score_fraction", "global_accuracy", "infeasibility", "coverage"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.regret_mean is not None and self.regret_mean < 0:
            raise ValueError("regret_mean must be non-negative")

    def to_row(self) -> dict:
        row = asdict(self)
        row["flags"] = "; ".join(self.flags)
        return row


def report(learned: MaxSatModel, truth: MaxSatModel, data: Dataset | None = None,
           regret_samples: int = 1000, seed: int = 0) -> EvalReport:
    _same_n(learned, truth)
    flags: list[str] = []
    frac = score(learned, data) / len(data) if data is not None and len(data) else 1.0
    acc = global_accuracy(learned, truth)
    inf, f = infeasibility(learned, truth)
    flags += f
    reg = regret(learned, truth, regret_samples, np.random.default_rng(seed))
    flags += reg.flags
    return EvalReport(frac, acc, inf, reg.mean, reg.normalizer, reg.sample_count, reg.coverage,
                      flags)


__all__ = [
    "BoundCheck",
    "EvalReport",
    "RegretResult",
    "Representativeness",
    "average_regret",
    "context_risk",
    "global_accuracy",
    "infeasibility",
    "regret",
    "regret_bound_check",
    "report",
    "representativeness",
]
