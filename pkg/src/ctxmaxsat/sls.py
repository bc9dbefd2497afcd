"""Stochastic local search over MAX-SAT models.

The search state is a complete model with a fixed number of clause slots.
Each step picks a misclassified training example, builds the neighbours that
could fix it, scores them all on the training set and moves to one of them
according to the chosen WalkSAT-family strategy.
"""

from __future__ import annotations

import enum
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ctxmaxsat import kernels
from ctxmaxsat.core import (
    Assignment,
    Clause,
    ContextualExample,
    Dataset,
    Literal,
    MaxSatModel,
)
from ctxmaxsat.solver import VALUE_TOL

WEIGHT_TOL = 1e-9
INITIAL_WEIGHTS = (1.0, 0.5, 0.25, 0.125)


class Strategy(str, enum.Enum):
    WALKSAT = "walksat"
    NOVELTY = "novelty"
    NOVELTY_PLUS = "novelty+"
    ADAPTIVE_NOVELTY_PLUS = "adaptive-novelty+"


class Diagnosis(str, enum.Enum):
    POS_INFEASIBLE = "pos-predicted-infeasible"
    POS_SUBOPTIMAL = "pos-predicted-suboptimal"
    NEG_POSITIVE = "neg-predicted-positive"


@dataclass
class SlsConfig:
    strategy: Strategy = Strategy.WALKSAT
    restart_probability: float = 0.01
    walk_probability: float = 0.1
    cutoff_score: int | None = None
    cutoff_time: float = 60.0
    max_steps: int | None = None
    stagnation_fraction: float = 0.25
    seed: int = 0
    tabu_capacity: int = 50
    noise_phi: float = 0.2
    noise_theta: float = 1 / 6

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        for name in ("restart_probability", "walk_probability", "stagnation_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.cutoff_time <= 0:
            raise ValueError("cutoff_time must be positive")
        if self.tabu_capacity < 1:
            raise ValueError("tabu_capacity must be at least 1")


@dataclass
class SlsState:
    current: MaxSatModel
    best: MaxSatModel
    best_score: int
    visited: dict = field(default_factory=dict)
    visit_order: deque = field(default_factory=deque)
    step: int = 0
    last_improvement_step: int = 0
    last_improvement_time: float = 0.0
    last_noise_step: int = 0
    wp_current: float = 0.0

    def remember(self, model: MaxSatModel, capacity: int) -> None:
        sig = model.signature()
        self.visited[sig] = self.step
        self.visit_order.append((sig, self.step))
        while len(self.visit_order) > capacity:
            old, when = self.visit_order.popleft()
            if self.visited.get(old) == when:
                del self.visited[old]

    def forget(self) -> None:
        self.visited.clear()
        self.visit_order.clear()


class TraceRecord(NamedTuple):
    step: int
    elapsed_ms: float
    current_score: int
    best_score: int
    wp: float


# ---------------------------------------------------------------------------
# scoring


class PackedData:
    """Training set in the array layout the kernels consume."""

    def __init__(self, data: Dataset):
        self.data = data
        self.n = data.n
        ctxs = data.contexts()
        index = {c: i for i, c in enumerate(ctxs)}
        self.contexts = ctxs
        self.cmask = np.array([c.fixed_mask for c in ctxs], dtype=np.int64)
        self.cval = np.array([c.fixed_value for c in ctxs], dtype=np.int64)
        self.ex_ctx = np.array([index[ex.context] for ex in data], dtype=np.int64)
        self.ex_x = np.array([ex.assignment.value for ex in data], dtype=np.int64)
        self.ex_y = np.array([ex.label for ex in data], dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.ex_x)

    def score(self, model: MaxSatModel) -> int:
        return int(kernels.score(*kernels.pack_model(model), self.n, self.cmask, self.cval,
                                 self.ex_ctx, self.ex_x, self.ex_y, VALUE_TOL))

    def diagnose(self, model: MaxSatModel):
        return kernels.diagnose(*kernels.pack_model(model), self.n, self.cmask, self.cval,
                                self.ex_ctx, self.ex_x, VALUE_TOL)


def _packed(data) -> PackedData:
    return data if isinstance(data, PackedData) else PackedData(data)


def score(model: MaxSatModel, data: Dataset | PackedData) -> int:
    """Number of training examples the model's classifier labels correctly."""
    return _packed(data).score(model)


def misclassified(model: MaxSatModel, data: Dataset | PackedData):
    """``[(index, diagnosis)]`` for every misclassified example, plus per-context witnesses."""
    pd = _packed(data)
    codes, _, cwit = pd.diagnose(model)
    out = []
    for k, (code, y) in enumerate(zip(codes.tolist(), pd.ex_y.tolist())):
        if y and code == kernels.INFEASIBLE:
            out.append((k, Diagnosis.POS_INFEASIBLE))
        elif y and code == kernels.SUBOPTIMAL:
            out.append((k, Diagnosis.POS_SUBOPTIMAL))
        elif not y and code == 0:
            out.append((k, Diagnosis.NEG_POSITIVE))
    return out, cwit


def pick_misclassified(model: MaxSatModel, data: Dataset | PackedData,
                       rng: np.random.Generator):
    """A uniformly random misclassified example, its diagnosis and an optimum ``x*``
    of the model in that example's context (``None`` if the context is infeasible)."""
    pd = _packed(data)
    wrong, cwit = misclassified(model, pd)
    if not wrong:
        raise ValueError("model classifies every example correctly")
    k, diag = wrong[int(rng.integers(len(wrong)))]
    wit = int(cwit[pd.ex_ctx[k]])
    x_star = Assignment(pd.n, wit) if wit >= 0 else None
    return pd.data.examples[k], diag, x_star


# ---------------------------------------------------------------------------
# neighbourhood


class Move(NamedTuple):
    """One edit of clause slot ``j``; ``rule`` names the pruning rule that produced it."""

    kind: str  # to-hard | to-soft | halve | raise | add | remove | flip
    j: int
    literal: Literal | None
    rule: str


def apply_move(model: MaxSatModel, move: Move) -> MaxSatModel | None:
    """The edited model, or ``None`` if the move is invalid or a no-op."""
    j = move.j
    clause, hard, w = model.clauses[j], model.hard[j], model.weights[j]
    if move.kind == "to-hard":
        if hard:
            return None
        return model.replace(j, hard=True, weight=0.0)
    if move.kind == "to-soft":
        if not hard:
            return None
        return model.replace(j, hard=False, weight=1.0)
    if move.kind in ("halve", "raise"):
        if hard:
            return None
        new = w / 2 if move.kind == "halve" else (1 + w) / 2
        if abs(new - w) <= WEIGHT_TOL:
            return None
        return model.replace(j, weight=new)
    lits = set(clause.literals)
    lit = move.literal
    if move.kind == "add":
        if lit in lits or -lit in lits:
            return None
        lits.add(lit)
    elif move.kind == "remove":
        if lit not in lits or len(lits) == 1:
            return None
        lits.discard(lit)
    elif move.kind == "flip":
        if lit not in lits:
            return None
        lits.discard(lit)
        lits.add(-lit)
    else:
        raise ValueError(f"unknown move kind {move.kind!r}")
    return model.replace(j, clause=Clause(frozenset(lits)))


def _all_literals(n: int):
    for v in range(1, n + 1):
        yield Literal(v, True)
        yield Literal(v, False)


def clause_moves(model: MaxSatModel, j: int, rule: str = "naive") -> list[Move]:
    """Every move touching slot ``j`` (the unpruned neighbourhood restricted to one slot)."""
    moves = []
    if model.hard[j]:
        moves.append(Move("to-soft", j, None, rule))
    else:
        moves += [Move("to-hard", j, None, rule), Move("halve", j, None, rule),
                  Move("raise", j, None, rule)]
    for lit in _all_literals(model.n):
        if lit in model.clauses[j].literals:
            moves.append(Move("remove", j, lit, rule))
            moves.append(Move("flip", j, lit, rule))
        elif -lit not in model.clauses[j].literals:
            moves.append(Move("add", j, lit, rule))
    return moves


def naive_moves(model: MaxSatModel) -> list[Move]:
    return [mv for j in range(model.m) for mv in clause_moves(model, j)]


def pruned_moves(model: MaxSatModel, x: Assignment, diagnosis: Diagnosis,
                 x_star: Assignment | None) -> list[Move]:
    """Moves allowed by the label-driven pruning rules for one misclassified example."""
    moves: list[Move] = []
    if diagnosis is Diagnosis.POS_INFEASIBLE or x_star is None:
        for j, (c, h) in enumerate(zip(model.clauses, model.hard)):
            if h and not c.satisfied_by(x):
                moves += clause_moves(model, j, "pi-1")
        return moves

    lits_n = list(_all_literals(model.n))
    for j, (c, h) in enumerate(zip(model.clauses, model.hard)):
        sx, ss = c.satisfied_by(x), c.satisfied_by(x_star)
        if diagnosis is Diagnosis.POS_SUBOPTIMAL:
            if h:
                if sx:
                    moves += [Move("remove", j, l, "ps-1") for l in c if l.holds(x_star)]
                continue
            if sx and not ss:
                moves += [Move("to-hard", j, None, "ps-2"), Move("raise", j, None, "ps-2")]
            elif not sx and ss:
                moves += [Move("add", j, l, "ps-3") for l in lits_n if l.holds(x)]
                moves += [Move("remove", j, l, "ps-3") for l in c if l.holds(x_star)]
                moves.append(Move("halve", j, None, "ps-3"))
            elif not sx and not ss:
                moves += [Move("add", j, l, "ps-4") for l in lits_n
                          if l.holds(x) and not l.holds(x_star)]
            else:
                moves += [Move("add", j, l, "ps-5") for l in lits_n
                          if not l.holds(x) and l.holds(x_star)]
        else:  # NEG_POSITIVE
            if h:
                if sx:
                    moves += [Move("remove", j, l, "np-1") for l in c if l.holds(x)]
                continue
            if not sx and not ss:
                moves += [Move("to-hard", j, None, "np-2"), Move("raise", j, None, "np-2")]
            elif sx and ss:
                moves += [Move("remove", j, l, "np-3") for l in c if l.holds(x)]
                moves.append(Move("halve", j, None, "np-3"))
    return moves


def _realise(model: MaxSatModel, moves: list[Move]):
    seen = {model.signature()}
    out = []
    for mv in moves:
        nb = apply_move(model, mv)
        if nb is None:
            continue
        sig = nb.signature()
        if sig in seen:
            continue
        seen.add(sig)
        out.append((nb, mv))
    return out


def tagged_neighbours(model: MaxSatModel, example: ContextualExample, diagnosis: Diagnosis,
                      x_star: Assignment | None):
    """``(neighbour, move)`` pairs plus a fallback note (``None`` if none was needed)."""
    note = None
    if diagnosis is not Diagnosis.POS_INFEASIBLE and x_star is None:
        note = "no optimum in context; used infeasible-positive rules"
    out = _realise(model, pruned_moves(model, example.assignment, diagnosis, x_star))
    if not out:
        note = "empty pruned neighbourhood; used unpruned moves"
        out = _realise(model, naive_moves(model))
    return out, note


def neighbours(model: MaxSatModel, example: ContextualExample, diagnosis: Diagnosis,
               x_star: Assignment | None) -> list[MaxSatModel]:
    return [nb for nb, _ in tagged_neighbours(model, example, diagnosis, x_star)[0]]


def naive_neighbours(model: MaxSatModel) -> list[MaxSatModel]:
    return [nb for nb, _ in _realise(model, naive_moves(model))]


# ---------------------------------------------------------------------------
# strategies


def _novelty(scored, state: SlsState, rng: np.random.Generator) -> MaxSatModel:
    last = [state.visited.get(m.signature(), -1) for m, _ in scored]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], last[i], i))
    best = order[0]
    if len(order) > 1 and last[best] >= 0 and last[best] == max(last):
        return scored[order[1]][0]
    return scored[best][0]


def select_neighbour(strategy: Strategy, scored: list[tuple[MaxSatModel, int]],
                     state: SlsState, rng: np.random.Generator,
                     walk_probability: float = 0.1) -> MaxSatModel:
    if not scored:
        raise ValueError("no neighbours to select from")
    strategy = Strategy(strategy)
    if strategy is Strategy.WALKSAT:
        top = max(s for _, s in scored)
        ties = [m for m, s in scored if s == top]
        return ties[int(rng.integers(len(ties)))]
    if strategy is Strategy.NOVELTY:
        return _novelty(scored, state, rng)
    wp = walk_probability if strategy is Strategy.NOVELTY_PLUS else state.wp_current
    if rng.random() < wp:
        return scored[int(rng.integers(len(scored)))][0]
    return _novelty(scored, state, rng)


def update_noise(state: SlsState, improved: bool, n_examples: int, phi: float = 0.2,
                 theta: float = 1 / 6) -> float:
    """Adaptive noise: raise after ``theta * |S|`` steps without improvement, lower on improvement."""
    wp = state.wp_current
    if improved:
        wp -= wp * phi / 2
        state.last_noise_step = state.step
    elif state.step - max(state.last_noise_step, state.last_improvement_step) > theta * n_examples:
        wp += (1 - wp) * phi
        state.last_noise_step = state.step
    state.wp_current = min(1.0, max(0.0, wp))
    return state.wp_current


# ---------------------------------------------------------------------------
# learner


def random_clause(n: int, max_len: int, rng: np.random.Generator) -> Clause:
    length = int(rng.integers(1, min(max_len, n) + 1))
    vars_ = rng.choice(n, size=length, replace=False) + 1
    signs = rng.random(length) < 0.5
    return Clause(frozenset(Literal(int(v), bool(s)) for v, s in zip(vars_, signs)))


def random_model(n: int, m: int, max_clause_len: int, rng: np.random.Generator) -> MaxSatModel:
    clauses, hard, weights = [], [], []
    for _ in range(m):
        clauses.append(random_clause(n, max_clause_len, rng))
        h = bool(rng.random() < 0.5)
        hard.append(h)
        weights.append(0.0 if h else INITIAL_WEIGHTS[int(rng.integers(len(INITIAL_WEIGHTS)))])
    return MaxSatModel(n, tuple(clauses), tuple(hard), tuple(weights))


@dataclass
class LearnResult:
    model: MaxSatModel
    score: int
    trace: list[TraceRecord]
    steps: int
    elapsed: float
    restarts: int
    stopped: str
    fallbacks: int = 0


def learn(data: Dataset, m: int, max_clause_len: int | None = None,
          config: SlsConfig | None = None,
          clock: Callable[[], float] = time.perf_counter) -> LearnResult:
    """Anytime local search for a model with ``m`` clause slots; returns the best found."""
    config = config or SlsConfig()
    if m < 1:
        raise ValueError("m must be at least 1")
    if len(data) == 0:
        raise ValueError("empty dataset")
    n = data.n
    k = max_clause_len or max(1, math.ceil(n / 2))
    pd = PackedData(data)
    target = len(pd) if config.cutoff_score is None else config.cutoff_score
    if target > len(pd):
        raise ValueError(f"cutoff_score {target} exceeds |S|={len(pd)}")
    rng = np.random.default_rng(config.seed)
    start = clock()

    def elapsed() -> float:
        return clock() - start

    current = random_model(n, m, k, rng)
    cur_score = pd.score(current)
    state = SlsState(current, current, cur_score, wp_current=config.walk_probability)
    state.remember(current, config.tabu_capacity)
    trace = [TraceRecord(0, 0.0, cur_score, cur_score, state.wp_current)]
    restarts = fallbacks = 0
    stopped = "score"
    if config.max_steps is not None:
        stall_limit = config.stagnation_fraction * config.max_steps
    else:
        stall_limit = config.stagnation_fraction * config.cutoff_time

    while state.best_score < target:
        if config.max_steps is not None:
            if state.step >= config.max_steps:
                stopped = "steps"
                break
        elif elapsed() >= config.cutoff_time:
            stopped = "time"
            break
        state.step += 1
        if config.max_steps is not None:
            stalled = state.step - state.last_improvement_step > stall_limit
        else:
            stalled = elapsed() - state.last_improvement_time > stall_limit
        if stalled or rng.random() < config.restart_probability:
            current = random_model(n, m, k, rng)
            restarts += 1
            if stalled:
                state.forget()
                state.last_improvement_step = state.step
                state.last_improvement_time = elapsed()
        else:
            ex, diag, x_star = pick_misclassified(current, pd, rng)
            cands, note = tagged_neighbours(current, ex, diag, x_star)
            fallbacks += note is not None
            if cands:
                scored = [(nb, pd.score(nb)) for nb, _ in cands]
                current = select_neighbour(config.strategy, scored, state, rng,
                                           config.walk_probability)
            else:
                current = random_model(n, m, k, rng)
                restarts += 1
        cur_score = pd.score(current)
        state.current = current
        state.remember(current, config.tabu_capacity)
        improved = cur_score > state.best_score
        if improved:
            state.best, state.best_score = current, cur_score
            state.last_improvement_step = state.step
            state.last_improvement_time = elapsed()
        if config.strategy is Strategy.ADAPTIVE_NOVELTY_PLUS:
            update_noise(state, improved, len(pd), config.noise_phi, config.noise_theta)
        trace.append(TraceRecord(state.step, elapsed() * 1000.0, cur_score, state.best_score,
                                 state.wp_current))

    return LearnResult(state.best, state.best_score, trace, state.step, elapsed(), restarts,
                       stopped, fallbacks)


__all__ = [
    "Diagnosis",
    "LearnResult",
    "Move",
    "PackedData",
    "SlsConfig",
    "SlsState",
    "Strategy",
    "TraceRecord",
    "apply_move",
    "learn",
    "naive_moves",
    "naive_neighbours",
    "neighbours",
    "pick_misclassified",
    "pruned_moves",
    "random_model",
    "score",
    "select_neighbour",
    "tagged_neighbours",
    "update_noise",
]
