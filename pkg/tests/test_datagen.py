import math

import numpy as np
import pytest

from ctxmaxsat.core import TOP, Assignment, Clause, Context, ContextualExample, Dataset, MaxSatModel
from ctxmaxsat.datagen import (
    KIND_INFEASIBLE,
    KIND_SUBOPTIMAL,
    ContextShortage,
    GenerationError,
    GenSpec,
    add_noise,
    build_dataset,
    gen_contexts,
    gen_model,
    generate,
    impacts,
    import_benchmark,
    reservoir_sample,
    sample_negatives,
    sample_positives,
)
from ctxmaxsat.sls import score
from ctxmaxsat.solver import classify, is_feasible, optimum_values, solve


def test_spec_validation():
    with pytest.raises(ValueError):
        GenSpec(noise_p=0.6)
    with pytest.raises(ValueError):
        GenSpec(n=3, context_len=4)


def test_empty_model():
    assert gen_model(GenSpec(m_hard=0, m_soft=0), np.random.default_rng(0)).m == 0


def test_model_shape():
    m = gen_model(GenSpec(n=8, m_hard=2, m_soft=2), np.random.default_rng(0))
    assert sum(m.hard) == 2 and m.m == 4
    assert all(len(c) <= 4 for c in m.clauses)
    assert len(set(m.clauses)) == 4
    assert all(0 < w <= 1 for w, h in zip(m.weights, m.hard) if not h)


def test_models_feasible():
    rng = np.random.default_rng(1)
    for _ in range(100):
        assert solve(gen_model(GenSpec(n=6, m_hard=5, m_soft=2), rng)).feasible


def test_single_literal_context_qualifies():
    model = MaxSatModel(2, (Clause.of(-1),), (False,), (1.0,))
    spec = GenSpec(n=2, m_hard=0, m_soft=1, context_count=1, context_len=1, neg_per_context=0)
    glob = solve(model)
    assert impacts(model, Context.of(1), glob.value, optimum_values(model))
    ctxs = gen_contexts(model, spec, np.random.default_rng(0))
    assert ctxs == [Context.of(1)] or ctxs == [Context.of(2)] or ctxs == [Context.of(-2)]


def test_contexts_reverified():
    rng = np.random.default_rng(2)
    spec = GenSpec(n=8, context_count=15)
    for _ in range(3):
        model = gen_model(spec, rng)
        try:
            ctxs = gen_contexts(model, spec, rng)
        except ContextShortage:
            continue
        glob = solve(model)
        opt = optimum_values(model)
        assert len(set(ctxs)) == len(ctxs)
        for psi in ctxs:
            assert impacts(model, psi, glob.value, opt)
            assert len(psi) == spec.context_len


def test_context_shortage():
    model = MaxSatModel(2)  # nothing changes anything
    with pytest.raises(ContextShortage):
        gen_contexts(model, GenSpec(n=2, context_count=1, context_len=1), np.random.default_rng(0))


def test_unique_optimum_sets_flag():
    model = MaxSatModel(2, (Clause.of(1), Clause.of(2)), (False, False), (1.0, 1.0))
    got, truncated = sample_positives(model, TOP, 2, np.random.default_rng(0))
    assert [a.value for a in got] == [3] and truncated


def test_positives_are_optimal():
    rng = np.random.default_rng(3)
    spec = GenSpec(n=6)
    for _ in range(20):
        model = gen_model(spec, rng)
        got, _ = sample_positives(model, TOP, 3, rng)
        assert all(classify(model, TOP, a) for a in got)


def test_reservoir_uniform():
    rng = np.random.default_rng(4)
    trials = 10_000
    counts = np.zeros(5)
    for _ in range(trials):
        for v in reservoir_sample(range(5), 2, rng):
            counts[v] += 1
    p = 0.4
    sigma = math.sqrt(trials * p * (1 - p))
    assert np.all(np.abs(counts / 1 - trials * p) <= 3 * sigma)


def test_negatives_without_hard_constraints_are_suboptimal():
    model = MaxSatModel(3, (Clause.of(1), Clause.of(2)), (False, False), (1.0, 0.5))
    xs, kinds, flags = sample_negatives(model, TOP, 4, 0.5, np.random.default_rng(0))
    assert set(kinds) == {KIND_SUBOPTIMAL} and len(xs) == 4
    assert f"no-{KIND_INFEASIBLE}" in flags


def test_negative_kinds_verified():
    rng = np.random.default_rng(5)
    spec = GenSpec(n=6, m_hard=3, m_soft=3)
    for _ in range(20):
        model = gen_model(spec, rng)
        psi = Context.of(int(rng.integers(1, 7)) * (1 if rng.random() < 0.5 else -1))
        if not solve(model, psi).feasible:
            continue
        try:
            xs, kinds, _ = sample_negatives(model, psi, 4, 0.5, rng)
        except GenerationError:
            continue
        for a, kind in zip(xs, kinds):
            assert psi.satisfied_by(a) and not classify(model, psi, a)
            assert is_feasible(model, psi, a) == (kind == KIND_SUBOPTIMAL)


def _data(labels):
    exs = [ContextualExample(TOP, Assignment(3, i % 8), bool(y)) for i, y in enumerate(labels)]
    return Dataset(3, tuple(exs))


def test_noise_zero_is_identity():
    data = _data([1, 0, 1, 1])
    assert add_noise(data, 0.0, np.random.default_rng(0)).examples == data.examples


def test_noise_rate_and_independence():
    rng = np.random.default_rng(6)
    labels = rng.integers(0, 2, size=100_000)
    data = _data(labels)
    p = 0.5 - 1e-3
    noisy = add_noise(data, p, rng)
    flipped = np.array([a.label != b.label for a, b in zip(data, noisy)])
    sigma = math.sqrt(len(labels) * p * (1 - p))
    assert abs(flipped.sum() - len(labels) * p) <= 3 * sigma
    # 2x2 chi-square of (original label, flipped), 1 dof, 0.999 quantile ~ 10.83
    table = np.array([[np.sum((labels == y) & (flipped == f)) for f in (0, 1)] for y in (0, 1)])
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
    assert ((table - expected) ** 2 / expected).sum() < 10.83
    with pytest.raises(ValueError):
        add_noise(data, 0.5, rng)


CNF_HEADER = "p cnf 20 91\n"


def _cnf(rng):
    lines = []
    for _ in range(91):
        vars_ = rng.choice(20, size=3, replace=False) + 1
        lines.append(" ".join(str(int(v) * (1 if rng.random() < 0.5 else -1)) for v in vars_) + " 0")
    return CNF_HEADER + "\n".join(lines) + "\n"


def test_import_benchmark():
    rng = np.random.default_rng(7)
    text = _cnf(rng)
    model = import_benchmark(text, 20, 0.5, rng)
    assert sum(model.hard) == 10 and model.m == 20 and solve(model, limit=20).feasible
    sat = import_benchmark("p cnf 3 2\n1 2 0\n-1 3 0\n", 2, 0.0, rng)
    assert all(sat.hard) and sat.m == 2


def test_build_dataset_counts_and_consistency():
    spec = GenSpec(n=8, seed=0)
    truth, data = generate(spec)
    assert len(data) == 100 and len(data.contexts()) == 25
    assert score(truth, data) == len(data)
    assert all(ex.context.satisfied_by(ex.assignment) for ex in data)
    assert sum(ex.label for ex in data) == 50


def test_generate_independent_of_jobs():
    spec = GenSpec(n=6, context_count=6, seed=4)
    t1, d1 = generate(spec)
    t2, d2 = generate(spec, jobs=2)
    assert t1 == t2 and d1.examples == d2.examples


def test_generate_noise_metadata():
    truth, data = generate(GenSpec(n=6, context_count=6, seed=4, noise_p=0.2))
    assert data.metadata["noise_p"] == 0.2 and "flipped" in data.metadata
    assert score(truth, data) == len(data) - data.metadata["flipped"]


def test_build_dataset_uses_given_model():
    spec = GenSpec(n=6, context_count=4, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        model = gen_model(spec, rng)
        try:
            data = build_dataset(model, spec, rng)
        except ContextShortage:
            continue
        assert score(model, data) == len(data)
        return
    pytest.fail("no model admitted four impacting contexts")
