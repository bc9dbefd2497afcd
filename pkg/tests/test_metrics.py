import numpy as np
import pytest

import oracle
from conftest import random_instance, unit_model
from ctxmaxsat.core import TOP, Assignment, Clause, Context, MaxSatModel
from ctxmaxsat.datagen import GenSpec, generate
from ctxmaxsat.metrics import (
    global_accuracy,
    infeasibility,
    regret,
    regret_bound_check,
    report,
    representativeness,
)
from ctxmaxsat.solver import optimum_set, solve

H_44 = unit_model((0, 1, 1, 1, 0, 0))
TRUTH_44 = unit_model((1, 1, 1, 0, 0, 0))
PSI1, PSI2, PSI3 = Context.of(1), Context.of(-1), Context.of(2, 3)
INFEASIBLE = MaxSatModel(3, (Clause.of(1), Clause.of(-1)), (True, True), (0.0, 0.0))


def feasible_pair(rng, n):
    while True:
        a, _ = random_instance(rng, n, ctx_len=0)
        b, _ = random_instance(rng, n, ctx_len=0)
        if solve(a).feasible and solve(b).feasible:
            return a, b


def test_accuracy_identity_and_infeasible_learner():
    assert global_accuracy(TRUTH_44, TRUTH_44) == 1.0
    t = len(optimum_set(TRUTH_44))
    assert global_accuracy(INFEASIBLE, TRUTH_44) == (8 - t) / 8
    assert global_accuracy(INFEASIBLE, TRUTH_44, method="enumerate") == (8 - t) / 8


def test_accuracy_count_equals_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        a, b = feasible_pair(rng, n)
        acc = global_accuracy(a, b)
        assert acc == global_accuracy(a, b, method="enumerate")
        opt_a, opt_b = set(oracle.optimum(a, ())[1]), set(oracle.optimum(b, ())[1])
        agree = sum((x in opt_a) == (x in opt_b) for x in oracle.points(n))
        assert acc == agree / 2**n


def test_accuracy_invariant_under_rescaling():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = feasible_pair(rng, 5)
        lam = float(rng.uniform(0.1, 5.0))
        assert global_accuracy(a.scaled(lam), b) == global_accuracy(a, b)
        assert global_accuracy(a, b.scaled(lam)) == global_accuracy(a, b)


def test_infeasibility_examples():
    assert infeasibility(TRUTH_44, TRUTH_44)[0] == 0.0
    assert infeasibility(H_44, TRUTH_44)[0] == 0.0  # truth has no hard clauses
    val, flags = infeasibility(INFEASIBLE, TRUTH_44)
    assert flags


def test_infeasibility_count_equals_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b = feasible_pair(rng, int(rng.integers(2, 8)))
        v1, _ = infeasibility(a, b)
        v2, _ = infeasibility(a, b, method="enumerate")
        assert v1 == v2
        opt = [x for x in optimum_set(a)]
        bad = sum(not oracle.feasible(b, (), x.bits) for x in opt)
        assert v1 == bad / len(opt)


def test_regret_examples():
    assert regret(TRUTH_44, TRUTH_44).mean == 0.0
    truth = MaxSatModel(2, (Clause.of(-1), Clause.of(-2)), (False, False), (1.0, 1.0))
    learned = MaxSatModel(2, (Clause.of(1), Clause.of(-2)), (True, True), (0.0, 0.0))
    assert regret(learned, truth).mean == pytest.approx(0.5)


def test_regret_sampled_matches_exhaustive():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = feasible_pair(rng, 6)
        full = regret(a, b, k=10**6)
        if full.mean is None:
            continue
        sampled = regret(a, b, k=5, rng=rng)
        opt = [x for x in optimum_set(a) if oracle.feasible(b, (), x.bits)]
        best = solve(b).value
        gaps = [best - oracle.value(b, x.bits) for x in opt]
        expected = np.mean(gaps) / best if best > 1e-9 else np.mean(gaps)
        assert full.mean == pytest.approx(expected, abs=1e-12)
        assert full.coverage == pytest.approx(len(opt) / len(optimum_set(a)))
        assert sampled.sample_count == min(5, len(opt))


def test_bound_identity_and_random():
    assert regret_bound_check(TRUTH_44, TRUTH_44).lhs == 0.0
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        h, _ = random_instance(rng, n)
        truth, psi = random_instance(rng, n)
        if not solve(truth, psi).feasible:
            continue
        chk = regret_bound_check(h, truth, psi)
        assert chk.holds
        lam = float(rng.uniform(0.2, 1.0))
        scaled = regret_bound_check(h, truth.scaled(lam), psi)
        assert scaled.holds
        if chk.opt_size:
            assert scaled.lhs == pytest.approx(lam * chk.lhs, abs=1e-12)


def test_representativeness_worked_example():
    r12 = representativeness(H_44, TRUTH_44, [PSI1, PSI2])
    assert not r12.representative
    assert r12.counts[Assignment.from_bits((0, 1, 1))] == 0
    r123 = representativeness(H_44, TRUTH_44, [PSI1, PSI2, PSI3])
    assert r123.representative
    assert r123.counts[Assignment.from_bits((0, 1, 1))] >= 1


def test_representativeness_identity():
    ctxs = [PSI1, PSI2, PSI3]
    r = representativeness(TRUTH_44, TRUTH_44, ctxs)
    for a, c in r.counts.items():
        assert c == sum(psi.satisfied_by(a) for psi in ctxs)


def test_report_perfect_and_degenerate():
    truth, data = generate(GenSpec(n=6, context_count=6, seed=0))
    rep = report(truth, truth, data)
    assert (rep.training_score_fraction, rep.global_accuracy, rep.infeasibility,
            rep.regret_mean) == (1.0, 1.0, 0.0, 0.0)
    bad = MaxSatModel(6, (Clause.of(1), Clause.of(-1)), (True, True), (0.0, 0.0))
    rep = report(bad, truth, data)
    assert rep.flags and 0.0 <= rep.global_accuracy <= 1.0
    assert set(rep.to_row()) >= {"global_accuracy", "regret_mean", "flags"}


def test_report_coverage_consistent_with_infeasibility():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = feasible_pair(rng, 6)
        rep = report(a, b, regret_samples=10**6)
        assert rep.coverage == pytest.approx(1 - rep.infeasibility)
