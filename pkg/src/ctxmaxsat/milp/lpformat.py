"""LP-file text for external MILP solvers, a reader for the same dialect, and solution files."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from ctxmaxsat.core import ParseError
from ctxmaxsat.milp.encoding import Constraint, MilpProblem

log = logging.getLogger(__name__)

TERMS_PER_LINE = 8
NAMES_PER_LINE = 10


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def _terms(terms) -> list[str]:
    out = []
    for name, coef in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        out.append(f"{sign} {name}" if mag == 1 else f"{sign} {fmt(mag)} {name}")
    return out


def _wrap(head: str, parts: list[str], tail: str = "") -> list[str]:
    lines = []
    for i in range(0, max(len(parts), 1), TERMS_PER_LINE):
        chunk = " ".join(parts[i:i + TERMS_PER_LINE])
        lines.append((head if i == 0 else "   ") + chunk)
    lines[-1] += tail
    return lines


def emit_lp(problem: MilpProblem) -> str:
    """The problem in CPLEX LP syntax; identical problems give identical text."""
    out = [f"\\ ctxmaxsat encoding n={problem.n} m={problem.m} contexts={len(problem.contexts)} "
           f"examples={len(problem.data)} refinements={len(problem.refinements)}",
           "Maximize"]
    order = {name: i for i, name in enumerate(problem.variables)}
    obj = _terms(sorted(problem.objective.items(), key=lambda t: order[t[0]]))
    out += _wrap(" obj: ", obj) if obj else [" obj: 0"]
    out.append("Subject To")
    for c in problem.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        out += _wrap(f" {c.name}: ", _terms(c.terms), f" {sense} {fmt(c.rhs)}")
    out.append("Bounds")
    for v in problem.variables.values():
        if v.kind == "binary":
            continue
        if v.lb is None and v.ub is None:
            out.append(f" {v.name} free")
        elif v.lb is None:
            out.append(f" -inf <= {v.name} <= {fmt(v.ub)}")
        elif v.ub is None:
            out.append(f" {v.name} >= {fmt(v.lb)}")
        else:
            out.append(f" {fmt(v.lb)} <= {v.name} <= {fmt(v.ub)}")
    bins = problem.binaries()
    if bins:
        out.append("Binary")
        for i in range(0, len(bins), NAMES_PER_LINE):
            out.append(" " + " ".join(bins[i:i + NAMES_PER_LINE]))
    out.append("End")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# reading


@dataclass
class LpModel:
    sense: str
    objective: dict[str, float]
    constraints: list[Constraint]
    bounds: dict[str, tuple[float | None, float | None]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)


_SECTIONS = {
    "maximize": "obj", "maximum": "obj", "max": "obj",
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "binary": "bin", "binaries": "bin", "bin": "bin",
    "general": "gen", "generals": "gen", "end": "end",
}
_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.\[\]]*)")


def _parse_expr(text: str, lineno: int) -> dict[str, float]:
    out: dict[str, float] = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"cannot parse term near {text[pos:pos + 20]!r}", line=lineno)
        sign, num, name = m.groups()
        coef = float(num) if num else 1.0
        out[name] = out.get(name, 0.0) + (-coef if sign == "-" else coef)
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return out


def _num(tok: str, lineno: int) -> float | None:
    t = tok.lower()
    if t in ("-inf", "-infinity"):
        return None
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return None
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"bad number {tok!r}", line=lineno) from None


def parse_lp(text: str) -> LpModel:
    """Read the LP subset produced by :func:`emit_lp` (plus common spelling variants)."""
    section = None
    sense = "max"
    objective: dict[str, float] = {}
    rows: list[tuple[int, str]] = []
    bounds: dict[str, tuple[float | None, float | None]] = {}
    binaries: list[str] = []
    obj_parts: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "obj":
                sense = "max" if key.startswith("max") else "min"
            if section == "end":
                break
            continue
        if section == "obj":
            obj_parts.append(line.split(":", 1)[1] if ":" in line else line)
        elif section == "st":
            if ":" in line or not rows:
                rows.append((lineno, line))
            else:
                rows[-1] = (rows[-1][0], rows[-1][1] + " " + line)
        elif section == "bounds":
            toks = line.split()
            if len(toks) == 2 and toks[1].lower() == "free":
                bounds[toks[0]] = (None, None)
            elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
                bounds[toks[2]] = (_num(toks[0], lineno), _num(toks[4], lineno))
            elif len(toks) == 3 and toks[1] in (">=", "<=", "="):
                lo, hi = bounds.get(toks[0], (0.0, None))
                v = _num(toks[2], lineno)
                if toks[1] == ">=":
                    lo = v
                elif toks[1] == "<=":
                    hi = v
                else:
                    lo = hi = v
                bounds[toks[0]] = (lo, hi)
            else:
                raise ParseError(f"unrecognised bound {line!r}", line=lineno)
        elif section == "bin":
            binaries.extend(line.split())
        elif section == "gen":
            continue
        else:
            raise ParseError(f"text outside any section: {line!r}", line=lineno)
    obj_text = " ".join(obj_parts).strip()
    if obj_text and obj_text != "0":
        objective = _parse_expr(obj_text, 0)
    constraints = []
    for lineno, row in rows:
        name, _, body = row.partition(":")
        m = re.search(r"(<=|>=|=<|=>|=|<|>)\s*([-+]?[\d.eE+-]+)\s*$", body)
        if not m:
            raise ParseError(f"constraint {name.strip()!r} lacks a sense and right-hand side",
                             line=lineno)
        op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(m.group(1), m.group(1))
        terms = _parse_expr(body[:m.start()], lineno)
        constraints.append(Constraint(name.strip(), "", tuple(terms.items()), op,
                                      float(m.group(2))))
    return LpModel(sense, objective, constraints, bounds, binaries)


# ---------------------------------------------------------------------------
# solutions


def parse_solution(text: str, known: set[str] | None = None) -> dict[str, float]:
    """Read ``name value`` lines; ``#`` starts a comment, unknown names are dropped with a warning."""
    out: dict[str, float] = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(f"expected 'name value', got {line!r}", line=lineno)
        try:
            val = float(toks[1])
        except ValueError:
            raise ParseError(f"bad value {toks[1]!r}", line=lineno, field=toks[0]) from None
        if known is not None and toks[0] not in known:
            unknown.append(toks[0])
            continue
        out[toks[0]] = val
    if unknown:
        log.warning("ignoring %d unknown solution names (first: %s)", len(unknown), unknown[0])
    return out


def format_solution(values: dict[str, float]) -> str:
    return "".join(f"{k} {fmt(v)}\n" for k, v in values.items())


__all__ = ["LpModel", "emit_lp", "format_solution", "parse_lp", "parse_solution"]
