import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import worked_data, worked_learned, worked_target
from ctxmaxsat.core import (
    TOP,
    Assignment,
    Clause,
    Context,
    ContextualExample,
    Literal,
    MaxSatModel,
    ParseError,
    StructureError,
    deserialize_dataset,
    deserialize_model,
    from_wcnf,
    parse_dimacs_cnf,
    satisfies_clause,
    satisfies_context,
    serialize_dataset,
    serialize_model,
    to_wcnf,
)
from ctxmaxsat.datagen import GenSpec, gen_model


def bits(*b):
    return Assignment.from_bits(b)


@pytest.mark.parametrize("a, lits, expected", [
    ((1, 0, 0), (1, -3), True),
    ((0, 0, 1), (1, -3), False),
    ((1, 1, 1), (-1,), False),
])
def test_satisfies_clause(a, lits, expected):
    assert satisfies_clause(bits(*a), Clause.of(*lits)) is expected


@pytest.mark.parametrize("a, lits, expected", [
    ((1, 1, 1), (), True),
    ((1, 1, 1), (2, 3), True),
    ((1, 0, 1), (2, 3), False),
])
def test_satisfies_context(a, lits, expected):
    assert satisfies_context(bits(*a), Context.of(*lits)) is expected


def test_bit_order_is_lsb_first():
    a = bits(1, 0, 0)
    assert a.value == 1 and a[1] and not a[3]
    assert Literal.from_int(-3).holds(a)


def test_structure_errors():
    with pytest.raises(StructureError):
        Clause.of()
    with pytest.raises(StructureError):
        Clause.of(1, -1)
    with pytest.raises(StructureError):
        Context.of(2, -2)
    with pytest.raises(StructureError):
        MaxSatModel(2, (Clause.of(3),), (True,), (0.0,))
    with pytest.raises(StructureError):
        MaxSatModel(2, (Clause.of(1),), (False,), (1.5,))
    with pytest.raises(StructureError):
        ContextualExample(Context.of(2, 3), bits(1, 0, 1), True)


def test_hard_weight_forced_to_zero():
    m = MaxSatModel(2, (Clause.of(1),), (True,), (0.7,))
    assert m.weights == (0.0,)


def test_empty_model_round_trip():
    m = MaxSatModel(4)
    assert deserialize_model(serialize_model(m)) == m


def test_worked_target_round_trip():
    m = worked_target()
    assert deserialize_model(serialize_model(m)) == m


def test_random_models_round_trip():
    rng = np.random.default_rng(1)
    for i in range(100):
        spec = GenSpec(n=int(rng.integers(3, 10)), m_hard=int(rng.integers(0, 4)),
                       m_soft=int(rng.integers(0, 4)))
        m = gen_model(spec, rng)
        back = deserialize_model(serialize_model(m))
        assert back == m and back.weights == m.weights


def test_dataset_round_trip():
    data = worked_data().with_examples(worked_data().examples, note="x")
    back = deserialize_dataset(serialize_dataset(data))
    assert back.examples == data.examples and back.metadata == {"note": "x"}
    assert [ex.label for ex in back] == [ex.label for ex in data]


@pytest.mark.parametrize("text, where", [
    ('{"n": 3, "clauses": [[1, 1]], "hard": [true], "weights": [0]}', "clauses"),
    ('{"n": 3, "clauses": [[1]], "hard": [1], "weights": [0]}', "hard"),
    ('{"n": 3, "clauses": [[1]], "hard": [true]}', "weights"),
])
def test_bad_model_documents(text, where):
    with pytest.raises(ParseError) as err:
        deserialize_model(text)
    assert err.value.field == where


def test_bad_dataset_line_reports_line_number():
    text = '{"n": 2}\n{"context": [], "assignment": [1, 0], "label": 1}\n' \
           '{"context": [2], "assignment": [1, 0], "label": 1}\n'
    with pytest.raises(ParseError) as err:
        deserialize_dataset(text)
    assert err.value.line == 3


def test_dimacs_multiline_and_trailer():
    text = "c comment\np cnf 3 2\n1 -2\n 0 2 3 0\n%\n0\n"
    assert parse_dimacs_cnf(text) == (3, [[1, -2], [2, 3]])


def test_wcnf_round_trip():
    m = worked_learned()
    assert from_wcnf(to_wcnf(m)) == m
    m = worked_target()
    assert from_wcnf(to_wcnf(m)) == m


def test_dataset_contexts_in_first_seen_order():
    data = worked_data()
    assert data.contexts() == [TOP, Context.of(3), Context.of(2, -3), Context.of(-2, -3)]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-6, 6).filter(bool), min_size=1, max_size=6, unique_by=abs),
       st.integers(0, 63))
def test_clause_semantics_match_literal_loop(lits, v):
    c = Clause.of(*lits)
    a = Assignment(6, v)
    expected = any(((v >> (abs(l) - 1)) & 1) == (l > 0) for l in lits)
    assert c.satisfied_by(a) is expected
