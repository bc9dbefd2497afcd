"""Synthetic ground-truth models and labelled contextual datasets."""

from __future__ import annotations

import logging
import math
from itertools import combinations, product
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from ctxmaxsat import kernels
from ctxmaxsat.core import (
    TOP,
    Assignment,
    Clause,
    Context,
    ContextualExample,
    Dataset,
    Literal,
    MaxSatModel,
    parse_dimacs_cnf,
)
from ctxmaxsat.solver import VALUE_TOL, model_count, optimum_values, solve

log = logging.getLogger(__name__)

DRAWS_PER_EXAMPLE = 10_000
POSITIVE_CAP_FACTOR = 10
MODEL_RETRIES = 1_000
CONTEXT_RETRIES_PER_CONTEXT = 1_000
CONTEXT_ENUMERATION_LIMIT = 1 << 16
MODEL_RESAMPLES = 500

KIND_POSITIVE = "optimal"
KIND_INFEASIBLE = "infeasible"
KIND_SUBOPTIMAL = "suboptimal"


class GenerationError(RuntimeError):
    """Sampling could not meet a request within its retry budget."""


class ContextShortage(GenerationError):
    """The model has too few contexts that change its optimum set."""


@dataclass
class GenSpec:
    n: int = 8
    m_hard: int = 2
    m_soft: int = 2
    max_clause_len: int | None = None
    context_count: int = 25
    context_len: int | None = None
    pos_per_context: int = 2
    neg_per_context: int = 2
    neg_split: float = 0.5
    noise_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.max_clause_len is None:
            self.max_clause_len = math.ceil(self.n / 2)
        if self.context_len is None:
            self.context_len = math.ceil(self.n / 2)
        if not 1 <= self.max_clause_len <= self.n:
            raise ValueError(f"max_clause_len={self.max_clause_len} outside [1, n]")
        if not 0 <= self.context_len <= self.n:
            raise ValueError(f"context_len={self.context_len} outside [0, n]")
        if min(self.m_hard, self.m_soft, self.context_count,
               self.pos_per_context, self.neg_per_context) < 0:
            raise ValueError("counts must be non-negative")
        if not 0.0 <= self.neg_split <= 1.0:
            raise ValueError(f"neg_split={self.neg_split} outside [0, 1]")
        if not 0.0 <= self.noise_p < 0.5:
            raise ValueError(f"noise_p={self.noise_p} must satisfy 0 <= p < 0.5")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# models


def clause_space_size(n: int, max_len: int) -> int:
    """Number of distinct non-tautological clauses with 1..max_len literals."""
    return sum(comb(n, k) * 2**k for k in range(1, max_len + 1))


def _random_clause(n: int, max_len: int, rng: np.random.Generator) -> Clause:
    # weighting the length by the number of clauses of that length makes the
    # draw uniform over the whole clause space without enumerating it
    sizes = np.array([comb(n, k) * 2**k for k in range(1, max_len + 1)], dtype=float)
    length = int(rng.choice(len(sizes), p=sizes / sizes.sum())) + 1
    vars_ = rng.choice(n, size=length, replace=False) + 1
    signs = rng.random(length) < 0.5
    return Clause(frozenset(Literal(int(v), bool(s)) for v, s in zip(vars_, signs)))


def _distinct_clauses(n: int, max_len: int, count: int, rng, exclude=()) -> list[Clause]:
    seen = set(exclude)
    out = []
    while len(out) < count:
        c = _random_clause(n, max_len, rng)
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def _uniform_weight(rng: np.random.Generator) -> float:
    return float(1.0 - rng.random())  # (0, 1]


def gen_model(spec: GenSpec, rng: np.random.Generator) -> MaxSatModel:
    """Random model with distinct clauses, uniform (0,1] soft weights and satisfiable hard part."""
    k = spec.max_clause_len
    total = spec.m_hard + spec.m_soft
    if total > clause_space_size(spec.n, k):
        raise ValueError(f"{total} distinct clauses requested; only "
                         f"{clause_space_size(spec.n, k)} exist with length <= {k}")
    for _ in range(MODEL_RETRIES):
        hard = _distinct_clauses(spec.n, k, spec.m_hard, rng)
        if spec.m_hard and model_count(hard, TOP, spec.n) == 0:
            continue
        soft = _distinct_clauses(spec.n, k, spec.m_soft, rng, exclude=hard)
        weights = [_uniform_weight(rng) for _ in soft]
        return MaxSatModel(spec.n, tuple(hard + soft), (True,) * len(hard) + (False,) * len(soft),
                           (0.0,) * len(hard) + tuple(weights))
    raise GenerationError(f"no satisfiable set of {spec.m_hard} hard clauses "
                          f"after {MODEL_RETRIES} attempts")


# ---------------------------------------------------------------------------
# contexts


def random_context(n: int, length: int, rng: np.random.Generator) -> Context:
    vars_ = rng.choice(n, size=length, replace=False) + 1
    signs = rng.random(length) < 0.5
    return Context(frozenset(Literal(int(v), bool(s)) for v, s in zip(vars_, signs)))


def impacts(model: MaxSatModel, psi: Context, global_value: float,
            global_optima: list[int]) -> bool:
    """Feasible in ``psi`` and either the optimum value moves or every global optimum violates ``psi``."""
    res = solve(model, psi)
    if not res.feasible:
        return False
    if abs(res.value - global_value) > VALUE_TOL:
        return True
    return not any((a & psi.fixed_mask) == psi.fixed_value for a in global_optima)


def admits_negatives(model: MaxSatModel, psi: Context) -> bool:
    """Some assignment in ``psi`` is infeasible or sub-optimal."""
    free = model.n - len(psi)
    return len(optimum_values(model, psi, max_count=(1 << free))) < (1 << free)


def context_space_size(n: int, length: int) -> int:
    return comb(n, length) * 2**length


def _all_contexts(n: int, length: int) -> list[Context]:
    out = []
    for vars_ in combinations(range(1, n + 1), length):
        for signs in product((True, False), repeat=length):
            out.append(Context(frozenset(Literal(v, s) for v, s in zip(vars_, signs))))
    return out


def _candidate_contexts(n: int, length: int, count: int, rng: np.random.Generator):
    """Distinct random contexts: a shuffled full list when small, rejection draws otherwise."""
    if context_space_size(n, length) <= CONTEXT_ENUMERATION_LIMIT:
        pool = _all_contexts(n, length)
        for i in rng.permutation(len(pool)).tolist():
            yield pool[i]
        return
    seen: set[Context] = set()
    for _ in range(CONTEXT_RETRIES_PER_CONTEXT * max(1, count)):
        psi = random_context(n, length, rng)
        if psi not in seen:
            seen.add(psi)
            yield psi


def gen_contexts(model: MaxSatModel, spec: GenSpec, rng: np.random.Generator) -> list[Context]:
    """``context_count`` distinct feasible contexts that each change the model's optimum set."""
    glob = solve(model, TOP)
    if not glob.feasible:
        raise GenerationError("model is infeasible")
    optima = optimum_values(model, TOP)
    out: list[Context] = []
    tried = 0
    for psi in _candidate_contexts(model.n, spec.context_len, spec.context_count, rng):
        if len(out) == spec.context_count:
            break
        tried += 1
        if impacts(model, psi, glob.value, optima) and (
                spec.neg_per_context == 0 or admits_negatives(model, psi)):
            out.append(psi)
    if len(out) < spec.context_count:
        raise ContextShortage(f"found {len(out)} of {spec.context_count} impacting contexts "
                              f"among {tried} distinct candidates")
    return out


# ---------------------------------------------------------------------------
# examples


def reservoir_sample(items, k: int, rng: np.random.Generator) -> list:
    res = []
    for i, item in enumerate(items):
        if i < k:
            res.append(item)
        else:
            j = int(rng.integers(i + 1))
            if j < k:
                res[j] = item
    return res


def sample_positives(model: MaxSatModel, psi: Context, k: int,
                     rng: np.random.Generator) -> tuple[list[Assignment], bool]:
    """Up to ``k`` optima of ``psi`` and a flag set when fewer than ``k`` exist."""
    if not solve(model, psi).feasible:
        raise GenerationError(f"context {psi.to_ints()} is infeasible")
    pool = optimum_values(model, psi, max_count=POSITIVE_CAP_FACTOR * k)
    picked = reservoir_sample(pool, k, rng)
    return [Assignment(model.n, v) for v in picked], len(pool) < k


def _draw(model: MaxSatModel, psi: Context, size: int, rng: np.random.Generator):
    free = ((1 << model.n) - 1) & ~psi.fixed_mask
    raw = rng.integers(0, 1 << model.n, size=size, dtype=np.int64)
    xs = (raw & free) | psi.fixed_value
    vals, feas = kernels.evaluate_many(*kernels.pack_model(model), xs)
    return xs, vals, feas


def sample_negatives(model: MaxSatModel, psi: Context, k: int, split: float,
                     rng: np.random.Generator, budget: int = DRAWS_PER_EXAMPLE):
    """Rejection-sample ``k`` negatives in ``psi``: ``ceil(k*split)`` infeasible, the rest sub-optimal.

    Returns ``(assignments, kinds, flags)``. A kind that cannot be found within
    the draw budget is replaced by the other kind and noted in ``flags``.
    """
    res = solve(model, psi)
    if not res.feasible:
        raise GenerationError(f"context {psi.to_ints()} is infeasible")
    want = {KIND_INFEASIBLE: math.ceil(k * split), KIND_SUBOPTIMAL: k - math.ceil(k * split)}
    got: dict[str, list[int]] = {KIND_INFEASIBLE: [], KIND_SUBOPTIMAL: []}
    exhausted: set[str] = set()
    flags: list[str] = []

    def run(kind: str, count: int) -> None:
        draws = 0
        limit = budget * max(count, 1)
        while len(got[kind]) < want[kind] and draws < limit:
            size = min(256, limit - draws)
            xs, vals, feas = _draw(model, psi, size, rng)
            draws += size
            if kind == KIND_INFEASIBLE:
                hits = xs[feas == 0]
            else:
                hits = xs[(feas == 1) & (vals < res.value - VALUE_TOL)]
            got[kind].extend(int(v) for v in hits[: want[kind] - len(got[kind])])
        if len(got[kind]) < want[kind]:
            exhausted.add(kind)

    for kind in (KIND_INFEASIBLE, KIND_SUBOPTIMAL):
        run(kind, want[kind])
    for kind, other in ((KIND_INFEASIBLE, KIND_SUBOPTIMAL), (KIND_SUBOPTIMAL, KIND_INFEASIBLE)):
        missing = want[kind] - len(got[kind])
        if missing > 0:
            if other in exhausted:
                raise GenerationError(f"context {psi.to_ints()} admits neither infeasible nor "
                                      "sub-optimal assignments within the draw budget")
            flags.append(f"no-{kind}")
            want[other] += missing
            want[kind] = len(got[kind])
            run(other, missing)
            if other in exhausted:
                raise GenerationError(f"context {psi.to_ints()}: fallback to {other} "
                                      "negatives also failed")
    xs = got[KIND_INFEASIBLE] + got[KIND_SUBOPTIMAL]
    kinds = [KIND_INFEASIBLE] * len(got[KIND_INFEASIBLE]) + [KIND_SUBOPTIMAL] * len(got[KIND_SUBOPTIMAL])
    return [Assignment(model.n, v) for v in xs], kinds, flags


def add_noise(data: Dataset, p: float, rng: np.random.Generator,
              seed: int | None = None) -> Dataset:
    """Flip each label independently with probability ``p``."""
    if not 0.0 <= p < 0.5:
        raise ValueError(f"noise p={p} must satisfy 0 <= p < 0.5")
    flips = rng.random(len(data)) < p
    examples = [ContextualExample(ex.context, ex.assignment, ex.label != bool(f), ex.kind)
                for ex, f in zip(data.examples, flips.tolist())]
    return data.with_examples(examples, noise_p=p, noise_seed=seed, flipped=int(flips.sum()))


def _context_examples(model: MaxSatModel, psi: Context, spec: GenSpec, seed_seq):
    rng = np.random.default_rng(seed_seq)
    pos, truncated = sample_positives(model, psi, spec.pos_per_context, rng)
    neg, kinds, flags = sample_negatives(model, psi, spec.neg_per_context, spec.neg_split, rng)
    exs = [ContextualExample(psi, a, True, KIND_POSITIVE) for a in pos]
    exs += [ContextualExample(psi, a, False, kind) for a, kind in zip(neg, kinds)]
    if truncated:
        flags = [*flags, "positives-truncated"]
    return exs, flags


def build_dataset(model: MaxSatModel, spec: GenSpec, rng: np.random.Generator,
                  jobs: int = 1) -> Dataset:
    """Contexts, then per-context positives and negatives, then optional label noise.

    Every context gets its own child seed drawn from ``rng``, so the dataset
    does not depend on ``jobs``.
    """
    contexts = gen_contexts(model, spec, rng)
    base = int(rng.integers(2**63))
    children = np.random.SeedSequence(base).spawn(len(contexts))
    if jobs > 1 and len(contexts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_context_examples, [model] * len(contexts), contexts,
                                  [spec] * len(contexts), children))
    else:
        parts = [_context_examples(model, psi, spec, ss) for psi, ss in zip(contexts, children)]
    examples, notes = [], {}
    for psi, (exs, flags) in zip(contexts, parts):
        examples.extend(exs)
        if flags:
            notes[" ".join(map(str, psi.to_ints())) or "T"] = flags
    meta = {"seed": spec.seed, "spec": spec.to_dict(), "flags": notes}
    data = Dataset(model.n, tuple(examples), meta)
    if spec.noise_p > 0:
        data = add_noise(data, spec.noise_p, rng, seed=spec.seed)
    return data


def generate(spec: GenSpec, jobs: int = 1) -> tuple[MaxSatModel, Dataset]:
    """Ground-truth model and dataset, fully determined by ``spec`` (including its seed).

    Models that admit fewer than ``spec.context_count`` impacting contexts are
    replaced by a fresh draw.
    """
    rng = np.random.default_rng(spec.seed)
    for attempt in range(1, MODEL_RESAMPLES + 1):
        model = gen_model(spec, rng)
        try:
            data = build_dataset(model, spec, rng, jobs=jobs)
        except ContextShortage as err:
            log.debug("model attempt %d rejected: %s", attempt, err)
            continue
        data.metadata["model_attempts"] = attempt
        return model, data
    raise GenerationError(f"no model with {spec.context_count} impacting contexts "
                          f"after {MODEL_RESAMPLES} attempts")


# ---------------------------------------------------------------------------
# benchmarks


def import_benchmark(cnf_text: str, keep: int, soft_fraction: float, rng: np.random.Generator,
                     retries: int = MODEL_RETRIES) -> MaxSatModel:
    """Reduce a DIMACS CNF to ``keep`` random clauses, a fraction of them made soft."""
    n, raw = parse_dimacs_cnf(cnf_text)
    pool = []
    for lits in raw:
        lits = sorted(set(lits), key=abs)
        if any(-l in lits for l in lits):
            log.warning("dropping tautological clause %s", lits)
            continue
        pool.append(Clause.of(*lits))
    if not 0 <= keep <= len(pool):
        raise ValueError(f"keep={keep} outside [0, {len(pool)}]")
    if not 0.0 <= soft_fraction <= 1.0:
        raise ValueError(f"soft_fraction={soft_fraction} outside [0, 1]")
    n_soft = math.floor(keep * soft_fraction)
    for _ in range(retries):
        idx = rng.choice(len(pool), size=keep, replace=False)
        chosen = [pool[int(i)] for i in idx]
        soft, hard = chosen[:n_soft], chosen[n_soft:]
        if hard and model_count(hard, TOP, n) == 0:
            continue
        weights = [_uniform_weight(rng) for _ in soft]
        return MaxSatModel(n, tuple(hard + soft), (True,) * len(hard) + (False,) * len(soft),
                           (0.0,) * len(hard) + tuple(weights))
    raise GenerationError(f"no satisfiable hard subset after {retries} attempts")


__all__ = [
    "GenSpec",
    "ContextShortage",
    "GenerationError",
    "KIND_INFEASIBLE",
    "KIND_POSITIVE",
    "KIND_SUBOPTIMAL",
    "add_noise",
    "admits_negatives",
    "build_dataset",
    "clause_space_size",
    "context_space_size",
    "gen_contexts",
    "gen_model",
    "generate",
    "import_benchmark",
    "impacts",
    "random_context",
    "reservoir_sample",
    "sample_negatives",
    "sample_positives",
]
