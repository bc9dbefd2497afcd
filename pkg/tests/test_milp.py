import sys
from collections import Counter

import numpy as np
import pytest

from conftest import worked_data, worked_learned, worked_target
from ctxmaxsat.core import (
    TOP,
    Assignment,
    Clause,
    Context,
    ContextualExample,
    Dataset,
    MaxSatModel,
    StructureError,
)
from ctxmaxsat.datagen import random_context
from ctxmaxsat.milp import (
    DecodeError,
    ExternalSolverError,
    MilpProblem,
    build_encoding,
    check_solution,
    complete_from_model,
    decode,
    detect_mismatch,
    emit_lp,
    expected_family_sizes,
    format_solution,
    learn_milp,
    parse_lp,
    parse_solution,
    refine,
    solve_exhaustive,
    solve_external,
    solve_highs,
)
from ctxmaxsat.sls import random_model, score
from ctxmaxsat.solver import CapacityError, classify, is_feasible, optimum_set


def bits(*b):
    return Assignment.from_bits(b)


@pytest.fixture(scope="module")
def problem():
    return build_encoding(worked_data(), 2)


def test_family_sizes_match_closed_form(problem):
    data = worked_data()
    n_pos = sum(ex.label for ex in data)
    assert n_pos == 5
    assert problem.family_sizes() == expected_family_sizes(data.contexts(), 2, 7, 3, n_pos)


def test_single_example_family_sizes():
    data = Dataset(2, (ContextualExample(TOP, bits(1, 0), True),))
    P = build_encoding(data, 1)
    sizes = expected_family_sizes([TOP], 1, 1, 2, 1)
    assert P.family_sizes() == sizes
    assert len(P.constraints) == sum(sizes.values())


def test_worked_gamma_table(problem):
    vt = complete_from_model(problem, worked_target(), gammas=[1, 0, 1, 1])
    assert check_solution(problem, vt) == [] and problem.objective_value(vt) == 3
    vl = complete_from_model(problem, worked_learned(), gammas=[2, 1, 2, 2])
    assert check_solution(problem, vl) == [] and problem.objective_value(vl) == 7


def test_worked_learned_with_true_gamma_violates_labels(problem):
    vl = complete_from_model(problem, worked_learned())
    bad = check_solution(problem, vl)
    assert bad and all(name.startswith("label_pos") for name in bad)


def test_worked_mismatch():
    data = worked_data()
    found = detect_mismatch(worked_learned(), data)
    assert [v.example for v in found] == [2, 3]
    assert {v.x_plus for v in found} == {bits(1, 1, 1), bits(1, 0, 1)}
    x3 = Context.of(3)
    assert all(v.context == x3 for v in found)
    opt = optimum_set(worked_learned(), x3)
    assert bits(0, 1, 1) in opt
    assert all(v.x_prime in opt and v.x_prime == bits(0, 0, 1) for v in found)
    assert detect_mismatch(worked_target(), data) == []


def test_mismatch_matches_classify():
    rng = np.random.default_rng(0)
    data = worked_data()
    for _ in range(200):
        model = random_model(3, 2, 2, rng)
        flagged = {v.example for v in detect_mismatch(model, data)}
        expected = {k for k, ex in enumerate(data)
                    if ex.label and is_feasible(model, ex.context, ex.assignment)
                    and not classify(model, ex.context, ex.assignment)}
        assert flagged == expected


def test_refine_excludes_wrong_model_keeps_target(problem):
    found = detect_mismatch(worked_learned(), worked_data())
    assert refine(problem, []).constraints == problem.constraints
    R = refine(problem, found)
    assert len(R.constraints) > len(problem.constraints)
    assert check_solution(R, complete_from_model(R, worked_learned(), gammas=[2, 1, 2, 2]))
    assert check_solution(R, complete_from_model(R, worked_target(), gammas=[1, 0, 1, 1])) == []
    assert len(problem.refinements) == 0  # refine copies


def test_decode_learned_solution(problem):
    vl = complete_from_model(problem, worked_learned(), gammas=[2, 1, 2, 2])
    assert decode(problem, vl) == worked_learned()


def test_decode_all_zero_rejected(problem):
    zero = {name: 0.0 for name in problem.variables}
    with pytest.raises(StructureError):
        decode(problem, zero)
    with pytest.raises(DecodeError):
        decode(problem, {})


def test_exhaustive_single_example():
    data = Dataset(2, (ContextualExample(Context.of(1), bits(1, 0), True),))
    P = build_encoding(data, 1)
    sol = solve_exhaustive(P)
    model = decode(P, sol.values)
    assert score(model, data) == 1
    assert check_solution(P, sol.values, tol=1e-6) == []


def test_exhaustive_agrees_with_highs():
    data = Dataset(2, (ContextualExample(TOP, bits(0, 1), False),))
    P = build_encoding(data, 1)
    a, b = solve_exhaustive(P), solve_highs(P)
    assert a.objective == pytest.approx(b.objective)


def test_exhaustive_capacity(problem):
    with pytest.raises(CapacityError):
        solve_exhaustive(problem)


def test_highs_pipeline_reaches_full_score():
    res = learn_milp(worked_data(), 2, backend="highs")
    assert res.status == "optimal" and score(res.model, worked_data()) == 7


def test_lp_round_trip(problem):
    text = emit_lp(problem)
    assert emit_lp(problem) == text
    lp = parse_lp(text)
    assert len(lp.constraints) == len(problem.constraints)
    ours = Counter((c.name, c.sense, c.rhs, tuple(sorted(c.terms))) for c in problem.constraints)
    theirs = Counter((c.name, c.sense, c.rhs, tuple(sorted(c.terms))) for c in lp.constraints)
    assert ours == theirs
    assert set(lp.binaries) == set(problem.binaries())
    assert lp.objective == {k: v for k, v in problem.objective.items() if v}
    names = list(problem.variables)
    assert len(names) == len(set(names)) and max(map(len, names)) <= 255


def test_lp_empty_problem():
    P = MilpProblem(1, 0, [], Dataset(1, ()), 2.0)
    text = emit_lp(P)
    assert "Maximize" in text and "Subject To" in text and text.rstrip().endswith("End")
    assert parse_lp(text).constraints == []


def test_solution_files():
    vals = {"a": 1.0, "b": 0.25}
    assert parse_solution(format_solution(vals)) == vals
    assert parse_solution("a 1 # c\nzz 3\n", known={"a"}) == {"a": 1.0}


FAKE_SOLVER = """
import sys
from ctxmaxsat.milp import parse_lp
lp = open(sys.argv[1]).read()
parse_lp(lp)
open(sys.argv[2], "w").write(open(sys.argv[3]).read())
"""


def test_external_solver(tmp_path, problem):
    vl = complete_from_model(problem, worked_target(), gammas=[1, 0, 1, 1])
    (tmp_path / "sol.txt").write_text(format_solution(vl))
    script = tmp_path / "fake.py"
    script.write_text(FAKE_SOLVER)
    cmd = f"{sys.executable} {script} {{lp}} {{solution}} {tmp_path / 'sol.txt'}"
    sol = solve_external(problem, cmd)
    assert decode(problem, sol.values) == worked_target() and sol.objective == 3
    with pytest.raises(ExternalSolverError) as err:
        solve_external(problem, f"{sys.executable} -c 'import sys; sys.exit(4)'")
    assert err.value.returncode == 4


def _labelled(truth, rng, size):
    exs = []
    for _ in range(size):
        psi = random_context(truth.n, int(rng.integers(0, 2)), rng)
        x = psi.fixed_value | (int(rng.integers(1 << truth.n)) & ~psi.fixed_mask)
        a = Assignment(truth.n, x)
        exs.append(ContextualExample(psi, a, classify(truth, psi, a)))
    return Dataset(truth.n, tuple(exs))


def test_refinement_keeps_ground_truth():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(200):
        truth = random_model(3, 2, 2, rng)
        data = _labelled(truth, rng, 4)
        P = build_encoding(data, 2)
        assert check_solution(P, complete_from_model(P, truth)) == []
        wrong = random_model(3, 2, 2, rng)
        found = detect_mismatch(wrong, data)
        if not found:
            continue
        R = refine(P, found)
        assert check_solution(R, complete_from_model(R, truth)) == []
        checked += 1
    assert checked >= 20
