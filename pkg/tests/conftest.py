import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctxmaxsat.core import (  # noqa: E402
    Assignment,
    Clause,
    Context,
    ContextualExample,
    Dataset,
    MaxSatModel,
)
from ctxmaxsat.datagen import random_context  # noqa: E402
from ctxmaxsat.sls import random_model  # noqa: E402

# The 3-variable worked MILP instance: (assignment, context, label).
WORKED_ROWS = [
    ((1, 1, 1), (), 0),
    ((0, 1, 0), (), 1),
    ((1, 1, 1), (3,), 1),
    ((1, 0, 1), (3,), 1),
    ((0, 1, 0), (2, -3), 1),
    ((1, 1, 0), (2, -3), 0),
    ((0, 0, 0), (-2, -3), 1),
]


def worked_data() -> Dataset:
    return Dataset(3, tuple(ContextualExample(Context.of(*c), Assignment.from_bits(a), bool(y))
                            for a, c, y in WORKED_ROWS))


def worked_target() -> MaxSatModel:
    return MaxSatModel(3, (Clause.of(1, -3), Clause.of(-1)), (True, False), (0.0, 1.0))


def worked_learned() -> MaxSatModel:
    return MaxSatModel(3, (Clause.of(-1), Clause.of(-1, 3)), (False, False), (1.0, 1.0))


def unit_model(weights) -> MaxSatModel:
    """Soft unit clauses over Phi = {X1, X2, X3, ~X1, ~X2, ~X3} with the given weights."""
    phi = (1, 2, 3, -1, -2, -3)
    keep = [(l, w) for l, w in zip(phi, weights)]
    return MaxSatModel(3, tuple(Clause.of(l) for l, _ in keep), (False,) * len(keep),
                       tuple(w for _, w in keep))


def random_instance(rng: np.random.Generator, n: int, m: int | None = None,
                    ctx_len: int | None = None):
    """A random model and a random context over ``n`` variables."""
    m = int(rng.integers(1, 7)) if m is None else m
    k = int(rng.integers(1, n + 1))
    model = random_model(n, m, k, rng)
    if rng.random() < 0.5:  # sprinkle arbitrary weights, including ties
        ws = [0.0 if h else float(rng.choice([0.25, 0.5, 1.0, rng.random()]))
              for h in model.hard]
        model = MaxSatModel(n, model.clauses, model.hard, tuple(ws))
    length = int(rng.integers(0, min(n, 4) + 1)) if ctx_len is None else ctx_len
    return model, random_context(n, length, rng)


def as_tuple(a: Assignment) -> tuple[int, ...]:
    return tuple(a.bits)


@pytest.fixture
def data_d():
    return worked_data()


@pytest.fixture
def target_d():
    return worked_target()


@pytest.fixture
def learned_d():
    return worked_learned()


# ---------------------------------------------------------------------------
# acceptance verdict lines, printed in the terminal summary

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
