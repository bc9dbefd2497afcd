"""Domain types for contextual MAX-SAT learning and their text formats.

Assignments are fixed-width bitsets: variable ``X_i`` lives in bit ``i - 1``
of an integer, so ``Assignment.from_bits((1, 0, 1))`` has value ``0b101``.
Every module works on this single representation; enumeration order is the
integer order of these bitsets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Iterator, Sequence


class StructureError(ValueError):
    """Raised when a value violates a structural invariant."""


class ParseError(ValueError):
    """Raised on a malformed document; carries the offending line or field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


@dataclass(frozen=True, order=True)
class Literal:
    var: int
    positive: bool = True

    def __post_init__(self):
        if not isinstance(self.var, int) or self.var < 1:
            raise StructureError(f"variable index must be a positive int, got {self.var!r}")

    @classmethod
    def from_int(cls, lit: int) -> Literal:
        """Build from the DIMACS sign convention: ``+v`` is X_v, ``-v`` is not X_v."""
        if lit == 0:
            raise StructureError("0 is not a literal")
        return cls(abs(lit), lit > 0)

    def __int__(self) -> int:
        return self.var if self.positive else -self.var

    def __neg__(self) -> Literal:
        return Literal(self.var, not self.positive)

    @property
    def bit(self) -> int:
        return 1 << (self.var - 1)

    def holds(self, a: Assignment) -> bool:
        if self.var > a.n:
            raise StructureError(f"literal {int(self)} out of range for n={a.n}")
        return bool(a.value & self.bit) == self.positive

    def __repr__(self) -> str:
        return f"{'' if self.positive else '~'}X{self.var}"


def _as_literals(items: Iterable[Literal | int]) -> frozenset[Literal]:
    return frozenset(x if isinstance(x, Literal) else Literal.from_int(int(x)) for x in items)


def _has_complement(lits: frozenset[Literal]) -> bool:
    return any(-lit in lits for lit in lits)


@dataclass(frozen=True)
class Clause:
    """A non-empty disjunction of literals without complementary pairs."""

    literals: frozenset[Literal]

    def __post_init__(self):
        lits = _as_literals(self.literals)
        object.__setattr__(self, "literals", lits)
        if not lits:
            raise StructureError("empty clause")
        if _has_complement(lits):
            raise StructureError(f"clause {sorted(map(int, lits))} contains a complementary pair")

    @classmethod
    def of(cls, *lits: int | Literal) -> Clause:
        return cls(frozenset(_as_literals(lits)))

    @cached_property
    def pos_mask(self) -> int:
        return sum(l.bit for l in self.literals if l.positive)

    @cached_property
    def neg_mask(self) -> int:
        return sum(l.bit for l in self.literals if not l.positive)

    @property
    def max_var(self) -> int:
        return max(l.var for l in self.literals)

    def to_ints(self) -> list[int]:
        return [int(l) for l in sorted(self.literals, key=lambda l: (l.var, not l.positive))]

    def satisfied_by(self, a: Assignment) -> bool:
        if self.max_var > a.n:
            raise StructureError(f"clause {self.to_ints()} out of range for n={a.n}")
        return bool((a.value & self.pos_mask) | (~a.value & self.neg_mask))

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self) -> Iterator[Literal]:
        return iter(sorted(self.literals, key=lambda l: (l.var, not l.positive)))

    def __repr__(self) -> str:
        return " | ".join(repr(l) for l in self)


@dataclass(frozen=True)
class Context:
    """A consistent conjunction of literals; the empty context is the global one."""

    literals: frozenset[Literal] = frozenset()

    def __post_init__(self):
        lits = _as_literals(self.literals)
        object.__setattr__(self, "literals", lits)
        if _has_complement(lits):
            raise StructureError(f"context {sorted(map(int, lits))} is inconsistent")

    @classmethod
    def of(cls, *lits: int | Literal) -> Context:
        return cls(frozenset(_as_literals(lits)))

    @cached_property
    def fixed_mask(self) -> int:
        return sum(l.bit for l in self.literals)

    @cached_property
    def fixed_value(self) -> int:
        return sum(l.bit for l in self.literals if l.positive)

    @property
    def max_var(self) -> int:
        return max((l.var for l in self.literals), default=0)

    def to_ints(self) -> list[int]:
        return [int(l) for l in sorted(self.literals, key=lambda l: (l.var, not l.positive))]

    def satisfied_by(self, a: Assignment) -> bool:
        if self.max_var > a.n:
            raise StructureError(f"context {self.to_ints()} out of range for n={a.n}")
        return (a.value & self.fixed_mask) == self.fixed_value

    def __len__(self) -> int:
        return len(self.literals)

    def __repr__(self) -> str:
        if not self.literals:
            return "TOP"
        return " & ".join(repr(Literal.from_int(i)) for i in self.to_ints())


TOP = Context()


@dataclass(frozen=True, order=True)
class Assignment:
    n: int
    value: int

    def __post_init__(self):
        if self.n < 0 or self.value < 0 or self.value >> self.n:
            raise StructureError(f"assignment value {self.value} does not fit in {self.n} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int | bool]) -> Assignment:
        return cls(len(bits), sum(1 << i for i, b in enumerate(bits) if b))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.n))

    def __getitem__(self, var: int) -> bool:
        if not 1 <= var <= self.n:
            raise StructureError(f"variable {var} out of range for n={self.n}")
        return bool((self.value >> (var - 1)) & 1)

    def __repr__(self) -> str:
        return "(" + ",".join(str(b) for b in self.bits) + ")"


@dataclass(frozen=True)
class MaxSatModel:
    """Hard clauses plus weighted soft clauses over ``n`` variables.

    Weights of hard clauses are forced to zero on construction, so two models
    differing only in immaterial hard weights compare equal.
    """

    n: int
    clauses: tuple[Clause, ...] = ()
    hard: tuple[bool, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        clauses = tuple(c if isinstance(c, Clause) else Clause.of(*c) for c in self.clauses)
        hard = tuple(bool(h) for h in self.hard)
        if not (len(clauses) == len(hard) == len(self.weights)):
            raise StructureError(
                f"length mismatch: {len(clauses)} clauses, {len(hard)} hard flags, "
                f"{len(self.weights)} weights"
            )
        weights = []
        for j, (h, w) in enumerate(zip(hard, self.weights)):
            w = float(w)
            if not (0.0 <= w <= 1.0) or math.isnan(w):
                raise StructureError(f"weight {w} of clause {j} outside [0, 1]")
            weights.append(0.0 if h else w)
        for c in clauses:
            if c.max_var > self.n:
                raise StructureError(f"clause {c.to_ints()} out of range for n={self.n}")
        object.__setattr__(self, "clauses", clauses)
        object.__setattr__(self, "hard", hard)
        object.__setattr__(self, "weights", tuple(weights))

    @property
    def m(self) -> int:
        return len(self.clauses)

    def hard_clauses(self) -> list[Clause]:
        return [c for c, h in zip(self.clauses, self.hard) if h]

    def soft_indices(self) -> list[int]:
        return [j for j, h in enumerate(self.hard) if not h]

    def replace(self, j: int, clause: Clause | None = None, hard: bool | None = None,
                weight: float | None = None) -> MaxSatModel:
        clauses = list(self.clauses)
        hs = list(self.hard)
        ws = list(self.weights)
        if clause is not None:
            clauses[j] = clause
        if hard is not None:
            hs[j] = hard
        if weight is not None:
            ws[j] = weight
        return MaxSatModel(self.n, tuple(clauses), tuple(hs), tuple(ws))

    def signature(self, digits: int = 6) -> tuple:
        """Hashable identity used by tabu memory; weights rounded to ``digits``."""
        return tuple(
            (tuple(c.to_ints()), h, round(w, digits))
            for c, h, w in zip(self.clauses, self.hard, self.weights)
        )

    def scaled(self, factor: float) -> MaxSatModel:
        """Soft weights multiplied by ``factor`` (values outside [0,1] are not clipped)."""
        # Bypass the [0,1] check: only used for argmax-invariance checks.
        obj = object.__new__(MaxSatModel)
        object.__setattr__(obj, "n", self.n)
        object.__setattr__(obj, "clauses", self.clauses)
        object.__setattr__(obj, "hard", self.hard)
        object.__setattr__(obj, "weights", tuple(w * factor for w in self.weights))
        return obj

    def __str__(self) -> str:
        lines = []
        for c, h, w in zip(self.clauses, self.hard, self.weights):
            lines.append(f"{'hard' if h else f'{w:g}'}: {c!r}")
        return "\n".join(lines) or "<empty model>"


@dataclass(frozen=True)
class ContextualExample:
    context: Context
    assignment: Assignment
    label: bool
    kind: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.context.satisfied_by(self.assignment):
            raise StructureError(
                f"assignment {self.assignment!r} does not satisfy context {self.context!r}"
            )
        object.__setattr__(self, "label", bool(self.label))


@dataclass(frozen=True)
class Dataset:
    n: int
    examples: tuple[ContextualExample, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        examples = tuple(self.examples)
        for k, ex in enumerate(examples):
            if ex.assignment.n != self.n:
                raise StructureError(f"example {k} has n={ex.assignment.n}, dataset has n={self.n}")
        object.__setattr__(self, "examples", examples)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[ContextualExample]:
        return iter(self.examples)

    def contexts(self) -> list[Context]:
        """Unique contexts in order of first appearance."""
        seen: dict[Context, None] = {}
        for ex in self.examples:
            seen.setdefault(ex.context, None)
        return list(seen)

    def with_examples(self, examples: Iterable[ContextualExample], **meta) -> Dataset:
        return Dataset(self.n, tuple(examples), {**self.metadata, **meta})


# ---------------------------------------------------------------------------
# predicates


def satisfies_clause(a: Assignment, c: Clause) -> bool:
    return c.satisfied_by(a)


def satisfies_context(a: Assignment, psi: Context) -> bool:
    return psi.satisfied_by(a)


# ---------------------------------------------------------------------------
# model documents (JSON)


def model_to_dict(model: MaxSatModel) -> dict:
    return {
        "n": model.n,
        "clauses": [c.to_ints() for c in model.clauses],
        "hard": list(model.hard),
        "weights": list(model.weights),
    }


def model_from_dict(doc: Any) -> MaxSatModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be an object")
    for key in ("n", "clauses", "hard", "weights"):
        if key not in doc:
            raise ParseError("missing", field=key)
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ParseError(f"expected a non-negative integer, got {n!r}", field="n")
    clauses = []
    for j, lits in enumerate(doc["clauses"]):
        if not isinstance(lits, list) or not all(isinstance(x, int) for x in lits):
            raise ParseError(f"clause {j} must be a list of signed ints", field="clauses")
        if len(set(lits)) != len(lits):
            raise ParseError(f"clause {j} repeats a literal", field="clauses")
        try:
            clauses.append(Clause.of(*lits))
        except StructureError as exc:
            raise ParseError(f"clause {j}: {exc}", field="clauses") from None
    hard = doc["hard"]
    if not isinstance(hard, list) or not all(isinstance(h, bool) for h in hard):
        raise ParseError("expected a list of booleans", field="hard")
    weights = doc["weights"]
    if not isinstance(weights, list) or not all(
        isinstance(w, (int, float)) and not isinstance(w, bool) for w in weights
    ):
        raise ParseError("expected a list of numbers", field="weights")
    try:
        return MaxSatModel(n, tuple(clauses), tuple(hard), tuple(float(w) for w in weights))
    except StructureError as exc:
        raise ParseError(str(exc)) from None


def serialize_model(model: MaxSatModel) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def deserialize_model(text: str) -> MaxSatModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# dataset documents (JSON lines: a header line, then one example per line)


def example_to_dict(ex: ContextualExample) -> dict:
    d = {
        "context": ex.context.to_ints(),
        "assignment": list(ex.assignment.bits),
        "label": int(ex.label),
    }
    if ex.kind is not None:
        d["kind"] = ex.kind
    return d


def serialize_dataset(data: Dataset) -> str:
    lines = [json.dumps({"n": data.n, "metadata": data.metadata}, sort_keys=True)]
    lines.extend(json.dumps(example_to_dict(ex)) for ex in data.examples)
    return "\n".join(lines) + "\n"


def deserialize_dataset(text: str) -> Dataset:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise ParseError("empty dataset document", line=1)

    def load(lineno: int, raw: str) -> Any:
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=lineno) from None

    lineno, raw = lines[0]
    header = load(lineno, raw)
    if not isinstance(header, dict) or not isinstance(header.get("n"), int):
        raise ParseError("header must be an object with integer 'n'", line=lineno, field="n")
    n = header["n"]
    examples = []
    for lineno, raw in lines[1:]:
        rec = load(lineno, raw)
        if not isinstance(rec, dict):
            raise ParseError("example must be an object", line=lineno)
        for key in ("context", "assignment", "label"):
            if key not in rec:
                raise ParseError("missing", line=lineno, field=key)
        bits = rec["assignment"]
        if not isinstance(bits, list) or len(bits) != n or any(b not in (0, 1) for b in bits):
            raise ParseError(f"expected {n} values in {{0,1}}", line=lineno, field="assignment")
        if rec["label"] not in (0, 1):
            raise ParseError("expected 0 or 1", line=lineno, field="label")
        try:
            ctx = Context.of(*rec["context"])
            if ctx.max_var > n:
                raise StructureError(f"context variable out of range for n={n}")
            ex = ContextualExample(ctx, Assignment.from_bits(bits), bool(rec["label"]),
                                   rec.get("kind"))
        except (StructureError, TypeError, ValueError) as exc:
            raise ParseError(str(exc), line=lineno) from None
        examples.append(ex)
    return Dataset(n, tuple(examples), header.get("metadata") or {})


# ---------------------------------------------------------------------------
# DIMACS


def parse_dimacs_cnf(text: str) -> tuple[int, list[list[int]]]:
    """Read a DIMACS CNF document into ``(n, clauses)``.

    Clauses may span lines; each ends at a ``0`` token. A ``%`` line ends the
    body (SATLIB instances carry this trailer).
    """
    n = None
    declared = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0] == "c":
            continue
        if fields[0] == "%":
            break
        if fields[0] == "p":
            if len(fields) != 4 or fields[1] != "cnf":
                raise ParseError(f"bad problem line {line.strip()!r}", line=lineno)
            try:
                n, declared = int(fields[2]), int(fields[3])
            except ValueError:
                raise ParseError("non-integer header field", line=lineno) from None
            continue
        if n is None:
            raise ParseError("clause before 'p cnf' header", line=lineno)
        for tok in fields:
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", line=lineno) from None
            if lit == 0:
                if not current:
                    raise ParseError("empty clause", line=lineno)
                if any(-x in current for x in current):
                    raise ParseError("tautological clause", line=lineno)
                clauses.append(current)
                current = []
            else:
                if abs(lit) > n:
                    raise ParseError(f"literal {lit} exceeds n={n}", line=lineno)
                if lit not in current:
                    current.append(lit)
    if n is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        raise ParseError("last clause not terminated by 0")
    if declared is not None and declared != len(clauses):
        raise ParseError(f"header declares {declared} clauses, found {len(clauses)}")
    return n, clauses


def to_wcnf(model: MaxSatModel, scale: int = 10**6) -> str:
    """DIMACS weighted CNF. Soft weights become ``round(w * scale)``; soft
    clauses whose scaled weight is zero are dropped (WCNF weights must be
    positive)."""
    soft = [(max(1, round(w * scale)) if w > 0 else 0, c)
            for c, h, w in zip(model.clauses, model.hard, model.weights) if not h]
    kept = [(w, c) for w, c in soft if w > 0]
    top = sum(w for w, _ in kept) + 1
    out = [f"c soft weights scaled by factor {scale}",
           f"p wcnf {model.n} {len(model.hard_clauses()) + len(kept)} {top}"]
    for c in model.hard_clauses():
        out.append(" ".join(map(str, [top, *c.to_ints(), 0])))
    for w, c in kept:
        out.append(" ".join(map(str, [w, *c.to_ints(), 0])))
    return "\n".join(out) + "\n"


def from_wcnf(text: str) -> MaxSatModel:
    """Inverse of :func:`to_wcnf` (reads the scale factor from the header comment)."""
    scale = 1
    n = top = None
    clauses, hard, weights = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if fields[0] == "c":
            if "factor" in fields:
                scale = int(fields[fields.index("factor") + 1])
            continue
        if fields[0] == "p":
            if len(fields) != 5 or fields[1] != "wcnf":
                raise ParseError("bad problem line", line=lineno)
            n, top = int(fields[2]), int(fields[4])
            continue
        if n is None:
            raise ParseError("clause before header", line=lineno)
        nums = [int(x) for x in fields]
        if nums[-1] != 0:
            raise ParseError("clause not terminated by 0", line=lineno)
        w, lits = nums[0], nums[1:-1]
        clauses.append(Clause.of(*lits))
        hard.append(w >= top)
        weights.append(0.0 if w >= top else w / scale)
    if n is None:
        raise ParseError("missing 'p wcnf' header")
    return MaxSatModel(n, tuple(clauses), tuple(hard), tuple(weights))
