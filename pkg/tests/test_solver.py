import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import as_tuple, random_instance, unit_model, worked_learned
from ctxmaxsat import _pykernels, kernels
from ctxmaxsat.core import TOP, Assignment, Clause, Context, ContextualExample, Dataset, MaxSatModel
from ctxmaxsat.datagen import random_context
from ctxmaxsat.sls import PackedData, random_model
from ctxmaxsat.solver import (
    CapacityError,
    classify,
    evaluate,
    is_feasible,
    model_count,
    optimal_region_formula,
    optimum_set,
    solve,
)

TRUTH_44 = unit_model((1, 1, 1, 0, 0, 0))


def bits(*b):
    return Assignment.from_bits(b)


def test_evaluate_examples():
    assert evaluate(MaxSatModel(3, (Clause.of(1),), (True,), (0.0,)), bits(0, 1, 0)) == 0
    assert evaluate(worked_learned(), bits(0, 1, 1)) == 2.0


def test_evaluate_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(300):
        model, _ = random_instance(rng, 6)
        a = Assignment(6, int(rng.integers(64)))
        assert evaluate(model, a) == pytest.approx(oracle.value(model, a.bits), abs=1e-12)


def test_is_feasible_examples_and_oracle():
    assert is_feasible(TRUTH_44, TOP, bits(0, 1, 1))
    assert not is_feasible(TRUTH_44, Context.of(1), bits(0, 1, 1))
    rng = np.random.default_rng(3)
    for _ in range(1000):
        model, psi = random_instance(rng, 5)
        a = Assignment(5, int(rng.integers(32)))
        assert is_feasible(model, psi, a) == oracle.feasible(model, psi.to_ints(), a.bits)


def test_solve_section_example():
    r1 = solve(TRUTH_44, Context.of(1))
    assert r1.value == 3 and as_tuple(r1.witness) == (1, 1, 1)
    r2 = solve(TRUTH_44, Context.of(-1))
    assert r2.value == 2 and as_tuple(r2.witness) == (0, 1, 1)
    assert optimum_set(TRUTH_44, Context.of(1)) == {bits(1, 1, 1)}


def test_contradictory_hard_constraints():
    m = MaxSatModel(2, (Clause.of(1), Clause.of(-1)), (True, True), (0.0, 0.0))
    assert not solve(m).feasible
    assert optimum_set(m) == frozenset()
    assert not classify(m, TOP, bits(1, 0))
    assert model_count(m.clauses, TOP, 2) == 0


def test_empty_model_everything_optimal():
    assert len(optimum_set(MaxSatModel(4))) == 16


def test_classify_examples():
    assert not classify(worked_learned(), Context.of(3), bits(1, 1, 1))
    rng = np.random.default_rng(4)
    for _ in range(50):
        model, psi = random_instance(rng, 5)
        res = solve(model, psi)
        if res.feasible:
            assert classify(model, psi, res.witness)


def test_model_count_examples():
    assert model_count([], TOP, 3) == 8
    assert model_count([Clause.of(1, -3)], TOP, 3) == 6


def test_optimal_region_examples():
    one = MaxSatModel(2, (Clause.of(1),), (False,), (1.0,))
    assert optimal_region_formula(one).optimal_subsets == (frozenset({0}),)
    assert optimal_region_formula(worked_learned()).optimal_subsets == (frozenset({0, 1}),)


def test_optimal_region_count_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(200):
        model, _ = random_instance(rng, 6, ctx_len=0)
        if not solve(model).feasible:
            continue
        region = optimal_region_formula(model)
        opt = optimum_set(model)
        assert region.count() == len(opt)
        for v in range(64):
            assert region.contains(Assignment(6, v)) == (Assignment(6, v) in opt)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        solve(MaxSatModel(21))
    assert solve(MaxSatModel(21), limit=21).feasible


def test_solve_witness_is_lowest_optimum():
    rng = np.random.default_rng(6)
    for _ in range(200):
        model, psi = random_instance(rng, 5)
        res = solve(model, psi)
        opt = optimum_set(model, psi)
        if res.feasible:
            assert res.witness == min(opt, key=lambda a: a.value)


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_solver_matches_oracle_property(n, seed):
    rng = np.random.default_rng(seed)
    model, psi = random_instance(rng, n)
    best, opt = oracle.optimum(model, psi.to_ints())
    res = solve(model, psi)
    assert res.feasible == (best is not None)
    if best is not None:
        assert res.value == pytest.approx(best, abs=1e-9)
    assert {as_tuple(a) for a in optimum_set(model, psi)} == set(opt)


# ---------------------------------------------------------------------------
# compiled kernels agree with the pure-Python fallback


@pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled extension not built")
def test_backends_agree():
    from ctxmaxsat import _ckernels
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        model, psi = random_instance(rng, n)
        packed = kernels.pack_model(model)
        args = (*packed, psi.fixed_mask, psi.fixed_value, n, 1e-9)
        assert _pykernels.best(*args) == _ckernels.best(*args)
        assert list(_pykernels.optima(*args, -1)) == list(_ckernels.optima(*args, -1))
        cargs = (packed[0], packed[1], psi.fixed_mask, psi.fixed_value, n)
        assert _pykernels.count(*cargs) == _ckernels.count(*cargs)
        xs = rng.integers(0, 1 << n, size=50, dtype=np.int64)
        for p, c in zip(_pykernels.evaluate_many(*packed, xs), _ckernels.evaluate_many(*packed, xs)):
            assert np.array_equal(np.asarray(p), np.asarray(c))


@pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled extension not built")
def test_score_kernels_agree():
    from ctxmaxsat import _ckernels
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = 6
        exs = []
        for _ in range(20):
            psi = random_context(n, int(rng.integers(0, 4)), rng)
            x = psi.fixed_value | (int(rng.integers(64)) & ~psi.fixed_mask)
            exs.append(ContextualExample(psi, Assignment(n, x), bool(rng.integers(2))))
        pd = PackedData(Dataset(n, tuple(exs)))
        model = random_model(n, 4, 3, rng)
        args = (*kernels.pack_model(model), n, pd.cmask, pd.cval, pd.ex_ctx, pd.ex_x)
        assert _pykernels.score(*args, pd.ex_y, 1e-9) == _ckernels.score(*args, pd.ex_y, 1e-9)
        for p, c in zip(_pykernels.diagnose(*args, 1e-9), _ckernels.diagnose(*args, 1e-9)):
            assert np.array_equal(np.asarray(p), np.asarray(c))
