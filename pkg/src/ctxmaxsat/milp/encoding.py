"""Mixed-integer encoding of the learning problem.

One problem instance covers a dataset and a fixed number ``m`` of clause
slots. Variables and constraint families follow the published encoding; the
per-context block picks a reference optimum ``x'`` for each context, the
per-example block forces positives to be feasible and optimal and negatives
not to be. Variable names are ``family_index...`` with 0-based clause,
context and example indices and literals written ``p<i>`` / ``n<i>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from ctxmaxsat.core import Assignment, Context, Dataset, Literal, MaxSatModel
from ctxmaxsat.solver import evaluate, is_feasible, solve

EPSILON = 0.01


class Var(NamedTuple):
    name: str
    kind: str  # binary | real
    lb: float | None  # None = -inf
    ub: float | None  # None = +inf


class Constraint(NamedTuple):
    name: str
    family: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # <= | >= | =
    rhs: float

    def activity(self, values: dict[str, float]) -> float:
        return sum(c * values[v] for v, c in self.terms)

    def satisfied(self, values: dict[str, float], tol: float = 1e-9) -> bool:
        act = self.activity(values)
        if self.sense == "<=":
            return act <= self.rhs + tol
        if self.sense == ">=":
            return act >= self.rhs - tol
        return abs(act - self.rhs) <= tol


class Violation(NamedTuple):
    """A context whose reference point ``x_prime`` beats the positive example ``x_plus``."""

    context: Context
    x_prime: Assignment
    x_plus: Assignment
    example: int


@dataclass
class MilpProblem:
    n: int
    m: int
    contexts: list[Context]
    data: Dataset
    big_m: float
    epsilon: float = EPSILON
    objective: dict[str, float] = field(default_factory=dict)
    variables: dict[str, Var] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    refinements: list[Violation] = field(default_factory=list)

    def add_var(self, name: str, kind: str = "binary", lb: float | None = 0.0,
                ub: float | None = 1.0) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name}")
        self.variables[name] = Var(name, kind, lb, ub)
        return name

    def add(self, family: str, idx: Iterable, terms: Iterable[tuple[str, float]], sense: str,
            rhs: float) -> None:
        merged: dict[str, float] = {}
        for v, c in terms:
            if v not in self.variables:
                raise KeyError(f"constraint {family} references unknown variable {v}")
            merged[v] = merged.get(v, 0.0) + c
        name = "_".join([family, *map(str, idx)])
        terms = tuple((v, c) for v, c in merged.items() if c != 0)
        self.constraints.append(Constraint(name, family, terms, sense, float(rhs)))

    def binaries(self) -> list[str]:
        return [v.name for v in self.variables.values() if v.kind == "binary"]

    def family_sizes(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.family] = out.get(c.family, 0) + 1
        return out

    def objective_value(self, values: dict[str, float]) -> float:
        return sum(c * values[v] for v, c in self.objective.items())

    def copy(self) -> MilpProblem:
        return MilpProblem(self.n, self.m, list(self.contexts), self.data, self.big_m,
                           self.epsilon, dict(self.objective), dict(self.variables),
                           list(self.constraints), list(self.refinements))


# ---------------------------------------------------------------------------
# naming


def lit_name(lit: Literal) -> str:
    return f"{'p' if lit.positive else 'n'}{lit.var}"


def literals(n: int) -> list[Literal]:
    return [Literal(v, s) for v in range(1, n + 1) for s in (True, False)]


def a_var(j: int, lit: Literal) -> str:
    return f"a_{j}_{lit_name(lit)}"


def lit_value(lit: Literal, x: Assignment) -> int:
    return int(lit.holds(x))


# ---------------------------------------------------------------------------
# construction


def build_encoding(data: Dataset, m: int, epsilon: float = EPSILON) -> MilpProblem:
    if len(data) == 0:
        raise ValueError("empty dataset")
    if m < 1:
        raise ValueError("m must be at least 1")
    n = data.n
    contexts = data.contexts()
    cidx = {c: i for i, c in enumerate(contexts)}
    P = MilpProblem(n, m, contexts, data, big_m=2.0 * (m + 1), epsilon=epsilon)
    M = P.big_m
    L = literals(n)
    J = range(m)
    K = range(len(data))

    # variables, grouped by family
    for j in J:
        for lit in L:
            P.add_var(a_var(j, lit))
        P.add_var(f"c_{j}")
        P.add_var(f"w_{j}", "real")
        P.add_var(f"wz_{j}")
    for ci in range(len(contexts)):
        P.add_var(f"ccov_{ci}")
        for i in range(1, n + 1):
            P.add_var(f"xp_{ci}_{i}")
        for j in J:
            for lit in L:
                P.add_var(f"covl_{ci}_{j}_{lit_name(lit)}")
            P.add_var(f"covc_{ci}_{j}")
            P.add_var(f"covpc_{ci}_{j}")
            P.add_var(f"wc_{ci}_{j}", "real")
        P.add_var(f"covctx_{ci}")
        P.add_var(f"gamma_{ci}", "real", None, None)
    for k in K:
        for j in J:
            P.add_var(f"wk_{j}_{k}", "real")
            P.add_var(f"cov_{j}_{k}")
            P.add_var(f"covp_{j}_{k}")
        P.add_var(f"opt_{k}")
        P.add_var(f"covk_{k}")

    P.objective = {f"gamma_{ci}": 1.0 for ci in range(len(contexts))}

    # first part: reference optimum per context
    for ci, psi in enumerate(contexts):
        ccov = f"ccov_{ci}"
        pos = sorted(l.var for l in psi.literals if l.positive)
        neg = sorted(l.var for l in psi.literals if not l.positive)
        for i in pos:
            P.add("ctxpos", (ci, i), [(ccov, 1), (f"xp_{ci}_{i}", -1)], "<=", 0)
        for i in neg:
            P.add("ctxneg", (ci, i), [(ccov, 1), (f"xp_{ci}_{i}", 1)], "<=", 1)
        # ccov >= sum_pos xp + sum_neg (1 - xp) - |psi| + 1
        P.add("ctxall", (ci,), [(ccov, 1)] + [(f"xp_{ci}_{i}", -1) for i in pos]
              + [(f"xp_{ci}_{i}", 1) for i in neg], ">=", len(neg) - len(psi) + 1)
        for j in J:
            for lit in L:
                cv = f"covl_{ci}_{j}_{lit_name(lit)}"
                P.add("litcov_a", (ci, j, lit_name(lit)), [(cv, 1), (a_var(j, lit), -1)], "<=", 0)
            for lit in L:
                cv = f"covl_{ci}_{j}_{lit_name(lit)}"
                xp = f"xp_{ci}_{lit.var}"
                if lit.positive:
                    P.add("litcov_xpos", (ci, j, lit_name(lit)), [(cv, 1), (xp, -1)], "<=", 0)
                    P.add("litcov_lbpos", (ci, j, lit_name(lit)),
                          [(cv, 1), (a_var(j, lit), -1), (xp, -1)], ">=", -1)
                else:
                    P.add("litcov_xneg", (ci, j, lit_name(lit)), [(cv, 1), (xp, 1)], "<=", 1)
                    # cov >= a + (1 - xp) - 1
                    P.add("litcov_lbneg", (ci, j, lit_name(lit)),
                          [(cv, 1), (a_var(j, lit), -1), (xp, 1)], ">=", 0)
            covc = f"covc_{ci}_{j}"
            for lit in L:
                P.add("clcov_lb", (ci, j, lit_name(lit)),
                      [(covc, 1), (f"covl_{ci}_{j}_{lit_name(lit)}", -1)], ">=", 0)
            P.add("clcov_ub", (ci, j), [(covc, 1)]
                  + [(f"covl_{ci}_{j}_{lit_name(lit)}", -1) for lit in L], "<=", 0)
            covpc = f"covpc_{ci}_{j}"
            P.add("clcovp_lb", (ci, j), [(covpc, 1), (covc, -1)], ">=", 0)
            P.add("clcovp_soft", (ci, j), [(covpc, 1), (f"c_{j}", 1)], ">=", 1)
            P.add("clcovp_ub", (ci, j), [(covpc, 1), (covc, -1), (f"c_{j}", 1)], "<=", 1)
        covctx = f"covctx_{ci}"
        P.add("ctxcov_ccov", (ci,), [(covctx, 1), (ccov, -1)], "<=", 0)
        for j in J:
            P.add("ctxcov_cl", (ci, j), [(covctx, 1), (f"covpc_{ci}_{j}", -1)], "<=", 0)
        P.add("ctxcov_lb", (ci,), [(covctx, 1), (ccov, -1)]
              + [(f"covpc_{ci}_{j}", -1) for j in J], ">=", -m)
        for j in J:
            wc, covc, cj, wj = f"wc_{ci}_{j}", f"covc_{ci}_{j}", f"c_{j}", f"w_{j}"
            P.add("wctx_cov", (ci, j), [(wc, 1), (covc, -1)], "<=", 0)
            P.add("wctx_soft", (ci, j), [(wc, 1), (cj, 1)], "<=", 1)
            P.add("wctx_ub", (ci, j), [(wc, 1), (wj, -1), (covc, 1), (cj, -1)], "<=", 1)
            P.add("wctx_lb", (ci, j), [(wc, 1), (wj, -1), (covc, -1), (cj, 1)], ">=", -1)
        g = f"gamma_{ci}"
        P.add("gamma_val", (ci,), [(g, 1)] + [(f"wc_{ci}_{j}", -1) for j in J], "<=", 0)
        P.add("gamma_cov", (ci,), [(g, 1), (covctx, -M)], "<=", 0)

    # second part: weights and examples
    for j in J:
        P.add("wzero_ub", (j,), [(f"w_{j}", 1), (f"wz_{j}", 1)], "<=", 1)
        P.add("wzero_lb", (j,), [(f"w_{j}", 1), (f"wz_{j}", 1)], ">=", 3 * epsilon)
    for k, ex in enumerate(data.examples):
        for j in J:
            wk, cov, cj, wj = f"wk_{j}_{k}", f"cov_{j}_{k}", f"c_{j}", f"w_{j}"
            P.add("wex_cov", (j, k), [(wk, 1), (cov, -1)], "<=", 0)
            P.add("wex_soft", (j, k), [(wk, 1), (cj, 1)], "<=", 1)
            P.add("wex_ub", (j, k), [(wk, 1), (wj, -1), (cov, 1), (cj, -1)], "<=", 1)
            P.add("wex_lb", (j, k), [(wk, 1), (wj, -1), (cov, -1), (cj, 1)], ">=", -1)
    for k, ex in enumerate(data.examples):
        g = f"gamma_{cidx[ex.context]}"
        wks = [(f"wk_{j}_{k}", -1) for j in J]
        P.add("opt_ub", (k,), [(g, 1), *wks, (f"opt_{k}", M)], "<=", M)
        P.add("opt_lb", (k,), [(g, 1), *wks, (f"opt_{k}", M)], ">=", epsilon)
    for k, ex in enumerate(data.examples):
        for j in J:
            covp, cov, cj = f"covp_{j}_{k}", f"cov_{j}_{k}", f"c_{j}"
            P.add("excovp_lb", (j, k), [(covp, 1), (cov, -1)], ">=", 0)
            P.add("excovp_soft", (j, k), [(covp, 1), (cj, 1)], ">=", 1)
            P.add("excovp_ub", (j, k), [(covp, 1), (cov, -1), (cj, 1)], "<=", 1)
    for k, ex in enumerate(data.examples):
        for j in J:
            cov = f"cov_{j}_{k}"
            for lit in L:
                P.add("excov_lit", (j, k, lit_name(lit)),
                      [(cov, 1), (a_var(j, lit), -lit_value(lit, ex.assignment))], ">=", 0)
            P.add("excov_ub", (j, k), [(cov, 1)] + [(a_var(j, lit), -1) for lit in L
                                                     if lit.holds(ex.assignment)], "<=", 0)
    for j in J:
        for i in range(1, n + 1):
            P.add("nocomp", (j, i), [(a_var(j, Literal(i, True)), 1),
                                     (a_var(j, Literal(i, False)), 1)], "<=", 1)
    for k, ex in enumerate(data.examples):
        for j in J:
            P.add("exfeas_cl", (j, k), [(f"covk_{k}", 1), (f"covp_{j}_{k}", -1)], "<=", 0)
        P.add("exfeas_lb", (k,), [(f"covk_{k}", 1)] + [(f"covp_{j}_{k}", -1) for j in J],
              ">=", -(m - 1))
        P.add("exfeas_ctx", (k,), [(f"covk_{k}", 1),
                                   (f"covctx_{cidx[ex.context]}", -1)], "<=", 0)
    for k, ex in enumerate(data.examples):
        terms = [(f"covk_{k}", 1), (f"opt_{k}", 1), (f"covctx_{cidx[ex.context]}", 1)]
        if ex.label:
            P.add("label_pos", (k,), terms, "=", 3)
        else:
            P.add("label_neg", (k,), terms, "<=", 2)
    return P


def expected_family_sizes(contexts: list[Context], m: int, s: int, n: int,
                          n_pos: int | None = None) -> dict[str, int]:
    """Closed-form constraint counts per family, read off the quantifier ranges."""
    P = len(contexts)
    n_ctx_pos = sum(sum(1 for l in c.literals if l.positive) for c in contexts)
    n_ctx_neg = sum(len(c) for c in contexts) - n_ctx_pos
    sizes = {
        "ctxpos": n_ctx_pos, "ctxneg": n_ctx_neg, "ctxall": P,
        "litcov_a": P * m * 2 * n,
        "litcov_xpos": P * m * n, "litcov_lbpos": P * m * n,
        "litcov_xneg": P * m * n, "litcov_lbneg": P * m * n,
        "clcov_lb": P * m * 2 * n, "clcov_ub": P * m,
        "clcovp_lb": P * m, "clcovp_soft": P * m, "clcovp_ub": P * m,
        "ctxcov_ccov": P, "ctxcov_cl": P * m, "ctxcov_lb": P,
        "wctx_cov": P * m, "wctx_soft": P * m, "wctx_ub": P * m, "wctx_lb": P * m,
        "gamma_val": P, "gamma_cov": P,
        "wzero_ub": m, "wzero_lb": m,
        "wex_cov": m * s, "wex_soft": m * s, "wex_ub": m * s, "wex_lb": m * s,
        "opt_ub": s, "opt_lb": s,
        "excovp_lb": m * s, "excovp_soft": m * s, "excovp_ub": m * s,
        "excov_lit": m * s * 2 * n, "excov_ub": m * s,
        "nocomp": m * n,
        "exfeas_cl": m * s, "exfeas_lb": s, "exfeas_ctx": s,
    }
    if n_pos is not None:
        sizes["label_pos"] = n_pos
        sizes["label_neg"] = s - n_pos
    return {k: v for k, v in sizes.items() if v}


# ---------------------------------------------------------------------------
# refinement rows


def _clause_cover_block(P: MilpProblem, tag: str, x: Assignment) -> list[str]:
    """Add variables computing whether each clause slot is satisfied by the constant ``x``
    and its soft weight contribution; returns the weight-contribution variable names."""
    L = literals(P.n)
    contrib = []
    for j in range(P.m):
        cov = P.add_var(f"{tag}cov_{j}")
        wv = P.add_var(f"{tag}w_{j}", "real")
        for lit in L:
            if lit.holds(x):
                P.add(f"{tag}cov_lit", (j, lit_name(lit)), [(cov, 1), (a_var(j, lit), -1)],
                      ">=", 0)
        P.add(f"{tag}cov_ub", (j,), [(cov, 1)] + [(a_var(j, lit), -1) for lit in L
                                                   if lit.holds(x)], "<=", 0)
        cj, wj = f"c_{j}", f"w_{j}"
        P.add(f"{tag}w_cov", (j,), [(wv, 1), (cov, -1)], "<=", 0)
        P.add(f"{tag}w_soft", (j,), [(wv, 1), (cj, 1)], "<=", 1)
        P.add(f"{tag}w_ub", (j,), [(wv, 1), (wj, -1), (cov, 1), (cj, -1)], "<=", 1)
        P.add(f"{tag}w_lb", (j,), [(wv, 1), (wj, -1), (cov, -1), (cj, 1)], ">=", -1)
        contrib.append(wv)
    return contrib


def add_refinement(P: MilpProblem, v: Violation) -> None:
    """Require ``x' violates a hard clause  or  f_w(x') <= f_w(x+)`` with a fresh selector."""
    r = len(P.refinements)
    tag_p = f"r{r}p"
    wp = _clause_cover_block(P, tag_p, v.x_prime)
    wq = [f"wk_{j}_{v.example}" for j in range(P.m)]
    feas = P.add_var(f"r{r}feas")
    b = P.add_var(f"r{r}sel")
    covp = []
    for j in range(P.m):
        cp = P.add_var(f"{tag_p}covp_{j}")
        covp.append(cp)
        P.add(f"{tag_p}covp_lb", (j,), [(cp, 1), (f"{tag_p}cov_{j}", -1)], ">=", 0)
        P.add(f"{tag_p}covp_soft", (j,), [(cp, 1), (f"c_{j}", 1)], ">=", 1)
        P.add(f"{tag_p}covp_ub", (j,), [(cp, 1), (f"{tag_p}cov_{j}", -1), (f"c_{j}", 1)],
              "<=", 1)
    P.add(f"r{r}feas_lb", (), [(feas, 1)] + [(c, -1) for c in covp], ">=", -(P.m - 1))
    for j, c in enumerate(covp):
        P.add(f"r{r}feas_ub", (j,), [(feas, 1), (c, -1)], "<=", 0)
    P.add(f"r{r}infeasible", (), [(feas, 1), (b, 1)], "<=", 1)
    P.add(f"r{r}value", (), [(w, 1) for w in wp] + [(w, -1) for w in wq] + [(b, -P.big_m)],
          "<=", 0)
    P.refinements.append(v)


# ---------------------------------------------------------------------------
# checking a model against the encoding


def complete_from_model(P: MilpProblem, model: MaxSatModel,
                        gammas: list[float] | None = None,
                        x_primes: list[Assignment | None] | None = None) -> dict[str, float]:
    """Values of every variable induced by ``model``.

    ``x_primes`` default to each context's optimum (or its lowest assignment
    when the context is infeasible) and ``gammas`` to the value the encoding
    allows at that point. Example optimality flags follow from ``gammas``.
    """
    if model.n != P.n or model.m != P.m:
        raise ValueError(f"model shape (n={model.n}, m={model.m}) does not match "
                         f"the encoding (n={P.n}, m={P.m})")
    vals: dict[str, float] = {}
    L = literals(P.n)
    for j, (cl, h, w) in enumerate(zip(model.clauses, model.hard, model.weights)):
        for lit in L:
            vals[a_var(j, lit)] = float(lit in cl.literals)
        vals[f"c_{j}"] = float(h)
        wj = 0.0 if h else float(w)
        vals[f"w_{j}"] = wj
        vals[f"wz_{j}"] = float(wj == 0.0)

    def covers(j: int, x: Assignment) -> float:
        return float(model.clauses[j].satisfied_by(x))

    for ci, psi in enumerate(P.contexts):
        if x_primes is not None and x_primes[ci] is not None:
            xp = x_primes[ci]
        else:
            res = solve(model, psi)
            xp = res.witness if res.feasible else Assignment(P.n, psi.fixed_value)
        vals[f"ccov_{ci}"] = float(psi.satisfied_by(xp))
        for i in range(1, P.n + 1):
            vals[f"xp_{ci}_{i}"] = float(xp[i])
        for j in range(P.m):
            for lit in L:
                vals[f"covl_{ci}_{j}_{lit_name(lit)}"] = float(
                    lit in model.clauses[j].literals and lit.holds(xp))
            vals[f"covc_{ci}_{j}"] = covers(j, xp)
            vals[f"covpc_{ci}_{j}"] = float(not model.hard[j] or covers(j, xp))
            vals[f"wc_{ci}_{j}"] = 0.0 if model.hard[j] else vals[f"w_{j}"] * covers(j, xp)
        feas = is_feasible(model, psi, xp)
        vals[f"covctx_{ci}"] = float(feas)
        if gammas is not None:
            vals[f"gamma_{ci}"] = float(gammas[ci])
        else:
            vals[f"gamma_{ci}"] = evaluate(model, xp) if feas else 0.0
    cidx = {c: i for i, c in enumerate(P.contexts)}
    for k, ex in enumerate(P.data.examples):
        x = ex.assignment
        for j in range(P.m):
            vals[f"cov_{j}_{k}"] = covers(j, x)
            vals[f"covp_{j}_{k}"] = float(not model.hard[j] or covers(j, x))
            vals[f"wk_{j}_{k}"] = 0.0 if model.hard[j] else vals[f"w_{j}"] * covers(j, x)
        vals[f"covk_{k}"] = float(all(c.satisfied_by(x) for c in model.hard_clauses()))
        g = vals[f"gamma_{cidx[ex.context]}"]
        vals[f"opt_{k}"] = float(evaluate(model, x) >= g - 1e-9)
    for r, v in enumerate(P.refinements):
        tag = f"r{r}p"
        for j in range(P.m):
            c = covers(j, v.x_prime)
            vals[f"{tag}cov_{j}"] = c
            vals[f"{tag}covp_{j}"] = float(not model.hard[j] or c)
            vals[f"{tag}w_{j}"] = 0.0 if model.hard[j] else vals[f"w_{j}"] * c
        feas = all(cl.satisfied_by(v.x_prime) for cl in model.hard_clauses())
        vals[f"r{r}feas"] = float(feas)
        vals[f"r{r}sel"] = float(not feas)
    missing = set(P.variables) - set(vals)
    if missing:
        raise KeyError(f"completion left variables unset: {sorted(missing)[:5]}")
    return vals


def check_solution(P: MilpProblem, values: dict[str, float], tol: float = 1e-9) -> list[str]:
    """Names of violated constraints and out-of-bound variables (empty when feasible)."""
    bad = []
    for v in P.variables.values():
        x = values[v.name]
        if v.lb is not None and x < v.lb - tol or v.ub is not None and x > v.ub + tol:
            bad.append(v.name)
        elif v.kind == "binary" and min(abs(x), abs(x - 1)) > tol:
            bad.append(v.name)
    bad += [c.name for c in P.constraints if not c.satisfied(values, tol)]
    return bad
