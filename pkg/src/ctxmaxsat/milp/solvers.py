"""Backends that solve a :class:`MilpProblem` and return a ``name -> value`` map.

* ``solve_exhaustive``: depth-first enumeration of the binary variables with
  interval propagation, and an LP over the continuous variables at each
  surviving leaf. Exact, and only practical for a couple of dozen binaries.
* ``solve_highs``: the HiGHS branch-and-bound solver shipped with SciPy.
* ``solve_external``: writes the LP file, runs a user command, reads back a
  ``name value`` solution file.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import coo_matrix

from ctxmaxsat.milp.encoding import MilpProblem
from ctxmaxsat.milp.lpformat import emit_lp, parse_solution
from ctxmaxsat.solver import CapacityError

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 24
FEAS_TOL = 1e-9


class ExternalSolverError(RuntimeError):
    def __init__(self, message: str, returncode: int | None = None, output: str = ""):
        super().__init__(message)
        self.returncode = returncode
        self.output = output


@dataclass
class MilpSolution:
    values: dict[str, float]
    objective: float
    solver: str


def _bounds(problem: MilpProblem):
    lb = np.array([-np.inf if v.lb is None else v.lb for v in problem.variables.values()])
    ub = np.array([np.inf if v.ub is None else v.ub for v in problem.variables.values()])
    return lb, ub


def _matrix(problem: MilpProblem, index: dict[str, int]):
    rows, cols, data = [], [], []
    lo = np.empty(len(problem.constraints))
    hi = np.empty(len(problem.constraints))
    for r, c in enumerate(problem.constraints):
        for name, coef in c.terms:
            rows.append(r)
            cols.append(index[name])
            data.append(coef)
        lo[r] = c.rhs if c.sense in (">=", "=") else -np.inf
        hi[r] = c.rhs if c.sense in ("<=", "=") else np.inf
    A = coo_matrix((data, (rows, cols)), shape=(len(problem.constraints), len(index))).tocsr()
    return A, lo, hi


def solve_highs(problem: MilpProblem, time_limit: float | None = None) -> MilpSolution | None:
    """Optimal solution via HiGHS, or ``None`` if the problem is infeasible."""
    names = list(problem.variables)
    index = {n: i for i, n in enumerate(names)}
    c = np.zeros(len(names))
    for name, coef in problem.objective.items():
        c[index[name]] = -coef  # milp minimises
    integrality = np.array([v.kind == "binary" for v in problem.variables.values()], dtype=int)
    lb, ub = _bounds(problem)
    A, lo, hi = _matrix(problem, index)
    options = {"disp": False, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = milp(c, integrality=integrality, bounds=Bounds(lb, ub),
               constraints=LinearConstraint(A, lo, hi) if len(problem.constraints) else (),
               options=options)
    if res.status == 2:
        return None
    if res.x is None:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    x = res.x.copy()
    x[integrality == 1] = np.round(x[integrality == 1])
    values = dict(zip(names, x.tolist()))
    return MilpSolution(values, problem.objective_value(values), "highs")


def solve_exhaustive(problem: MilpProblem,
                     max_binaries: int = EXHAUSTIVE_LIMIT) -> MilpSolution | None:
    """Exact solution by enumerating every binary assignment; ``None`` if infeasible.

    Among optimal leaves the first in enumeration order wins (binaries in
    registration order, 0 before 1), so the result is deterministic.
    """
    bins = problem.binaries()
    if len(bins) > max_binaries:
        raise CapacityError(f"{len(bins)} binary variables exceed the exhaustive limit "
                            f"{max_binaries}")
    conts = [v.name for v in problem.variables.values() if v.kind != "binary"]
    bidx = {n: i for i, n in enumerate(bins)}
    cidx = {n: i for i, n in enumerate(conts)}
    cons = problem.constraints
    cvar = {v.name: v for v in problem.variables.values()}

    # static part of each row's activity range coming from continuous variables
    cmin = np.zeros(len(cons))
    cmax = np.zeros(len(cons))
    touch: list[list[tuple[int, float]]] = [[] for _ in bins]
    for r, c in enumerate(cons):
        for name, coef in c.terms:
            if name in bidx:
                touch[bidx[name]].append((r, coef))
            else:
                v = cvar[name]
                lo = -math.inf if v.lb is None else v.lb
                hi = math.inf if v.ub is None else v.ub
                cmin[r] += min(coef * lo, coef * hi) if coef else 0.0
                cmax[r] += max(coef * lo, coef * hi) if coef else 0.0
    # binary contribution ranges, updated as variables get fixed
    bmin = np.zeros(len(cons))
    bmax = np.zeros(len(cons))
    for lst in touch:
        for r, coef in lst:
            bmin[r] += min(coef, 0.0)
            bmax[r] += max(coef, 0.0)
    rhs = np.array([c.rhs for c in cons])
    sense = [c.sense for c in cons]

    def ok(r: int) -> bool:
        lo, hi = cmin[r] + bmin[r], cmax[r] + bmax[r]
        if sense[r] in ("<=", "=") and lo > rhs[r] + FEAS_TOL:
            return False
        if sense[r] in (">=", "=") and hi < rhs[r] - FEAS_TOL:
            return False
        return True

    # LP data over continuous variables
    nc = len(conts)
    A = np.zeros((len(cons), nc))
    Bm = np.zeros((len(cons), len(bins)))
    for r, c in enumerate(cons):
        for name, coef in c.terms:
            if name in cidx:
                A[r, cidx[name]] += coef
            else:
                Bm[r, bidx[name]] += coef
    obj_c = np.zeros(nc)
    obj_b = np.zeros(len(bins))
    for name, coef in problem.objective.items():
        if name in cidx:
            obj_c[cidx[name]] = coef
        else:
            obj_b[bidx[name]] = coef
    le = np.array([s == "<=" for s in sense])
    ge = np.array([s == ">=" for s in sense])
    eq = np.array([s == "=" for s in sense])
    lp_bounds = [(cvar[n].lb, cvar[n].ub) for n in conts]

    best: dict = {"obj": -math.inf, "x": None, "z": None}
    z = np.zeros(len(bins))

    def leaf() -> None:
        shift = Bm @ z
        b = rhs - shift
        base = float(obj_b @ z)
        if nc == 0:
            act = shift
            if np.all(act[le] <= rhs[le] + FEAS_TOL) and np.all(act[ge] >= rhs[ge] - FEAS_TOL) \
                    and np.all(np.abs(act[eq] - rhs[eq]) <= FEAS_TOL):
                if base > best["obj"] + FEAS_TOL:
                    best.update(obj=base, x=np.zeros(0), z=z.copy())
            return
        A_ub = np.vstack([A[le], -A[ge]])
        b_ub = np.concatenate([b[le], -b[ge]])
        res = linprog(-obj_c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                      bounds=lp_bounds, method="highs")
        if res.status != 0:
            return
        val = base - res.fun
        if val > best["obj"] + FEAS_TOL:
            best.update(obj=val, x=res.x.copy(), z=z.copy())

    def dfs(i: int) -> None:
        if i == len(bins):
            leaf()
            return
        for val in (0.0, 1.0):
            z[i] = val
            for r, coef in touch[i]:
                bmin[r] += coef * val - min(coef, 0.0)
                bmax[r] += coef * val - max(coef, 0.0)
            if all(ok(r) for r, _ in touch[i]):
                dfs(i + 1)
            for r, coef in touch[i]:
                bmin[r] -= coef * val - min(coef, 0.0)
                bmax[r] -= coef * val - max(coef, 0.0)
        z[i] = 0.0

    if all(ok(r) for r in range(len(cons))):
        dfs(0)
    if best["z"] is None:
        return None
    values = {n: float(v) for n, v in zip(bins, best["z"])}
    values.update({n: float(v) for n, v in zip(conts, best["x"])})
    values = {n: values[n] for n in problem.variables}
    return MilpSolution(values, problem.objective_value(values), "exhaustive")


def solve_external(problem: MilpProblem, command: str, workdir: str | Path | None = None,
                   timeout: float | None = None) -> MilpSolution:
    """Run ``command`` with ``{lp}`` and ``{solution}`` substituted by file paths.

    The command must write ``name value`` lines to the solution path.
    """
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp = Path(tmp) / "problem.lp"
        sol = Path(tmp) / "solution.txt"
        lp.write_text(emit_lp(problem))
        argv = [a.format(lp=str(lp), solution=str(sol)) for a in shlex.split(command)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as err:
            raise ExternalSolverError(f"could not run solver: {err}") from err
        output = proc.stdout + proc.stderr
        if proc.returncode != 0:
            raise ExternalSolverError(f"solver exited with status {proc.returncode}",
                                      proc.returncode, output)
        if not sol.exists():
            raise ExternalSolverError("solver produced no solution file", proc.returncode, output)
        try:
            values = parse_solution(sol.read_text(), known=set(problem.variables))
        except ValueError as err:
            raise ExternalSolverError(f"unparsable solution: {err}", proc.returncode,
                                      output) from err
    missing = [n for n in problem.objective if n not in values]
    objective = problem.objective_value(values) if not missing else math.nan
    return MilpSolution(values, objective, "external")


def solve(problem: MilpProblem, backend: str = "auto", **kwargs) -> MilpSolution | None:
    if backend == "auto":
        backend = "exhaustive" if len(problem.binaries()) <= EXHAUSTIVE_LIMIT else "highs"
    if backend == "exhaustive":
        return solve_exhaustive(problem, **kwargs)
    if backend == "highs":
        return solve_highs(problem, **kwargs)
    raise ValueError(f"unknown backend {backend!r}")


__all__ = [
    "EXHAUSTIVE_LIMIT",
    "ExternalSolverError",
    "MilpSolution",
    "solve",
    "solve_exhaustive",
    "solve_external",
    "solve_highs",
]
