"""Backend selection for the enumeration kernels.

The compiled extension is used when importable; setting the environment
variable ``CTXMAXSAT_PURE_PYTHON=1`` forces the pure-Python module.
"""

from __future__ import annotations

import os

import numpy as np

from ctxmaxsat import _pykernels

if os.environ.get("CTXMAXSAT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from ctxmaxsat import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

best = _impl.best
optima = _impl.optima
count = _impl.count
evaluate_many = _impl.evaluate_many
diagnose = _impl.diagnose
score = _impl.score

INFEASIBLE = _pykernels.INFEASIBLE
SUBOPTIMAL = _pykernels.SUBOPTIMAL


def pack_clauses(clauses) -> tuple[np.ndarray, np.ndarray]:
    pos = np.fromiter((c.pos_mask for c in clauses), dtype=np.int64, count=len(clauses))
    neg = np.fromiter((c.neg_mask for c in clauses), dtype=np.int64, count=len(clauses))
    return pos, neg


def pack_model(model):
    """``(pos, neg, hard, w)`` arrays for a :class:`~ctxmaxsat.core.MaxSatModel`."""
    cached = model.__dict__.get("_packed")
    if cached is not None:
        return cached
    pos, neg = pack_clauses(model.clauses)
    hard = np.fromiter(model.hard, dtype=np.uint8, count=model.m)
    w = np.fromiter(model.weights, dtype=np.float64, count=model.m)
    packed = (pos, neg, hard, w)
    model.__dict__["_packed"] = packed
    return packed


def use_backend(name: str):
    """Rebind the module-level kernels (``"python"`` or ``"compiled"``); for benchmarks."""
    global _impl, BACKEND, best, optima, count, evaluate_many, diagnose, score
    if name == "python":
        _impl = _pykernels
    else:
        from ctxmaxsat import _ckernels as _impl
    BACKEND = name
    best, optima, count = _impl.best, _impl.optima, _impl.count
    evaluate_many, diagnose, score = _impl.evaluate_many, _impl.diagnose, _impl.score
