"""Pure-Python enumeration kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or ``CTXMAXSAT_PURE_PYTHON`` is set.

A model is passed packed: ``pos``/``neg`` clause literal masks, ``hard``
flags and soft ``w`` weights, all aligned arrays. A context is a pair
``(fmask, fval)`` of fixed-bit mask and fixed-bit values. Assignments are
enumerated as ``fval | s`` for every submask ``s`` of the free bits, in
increasing integer order.
"""

import numpy as np

INFEASIBLE = 1
SUBOPTIMAL = 2


def _split(pos, neg, hard, w):
    hp, hn, sp, sn, sw = [], [], [], [], []
    for p, q, h, x in zip(pos.tolist(), neg.tolist(), hard.tolist(), w.tolist()):
        if h:
            hp.append(p)
            hn.append(q)
        elif x != 0.0:
            sp.append(p)
            sn.append(q)
            sw.append(x)
    return list(zip(hp, hn)), list(zip(sp, sn, sw))


def _assignments(fmask, fval, n):
    free = ((1 << n) - 1) & ~fmask
    s = 0
    while True:
        yield fval | s
        if s == free:
            return
        s = (s - free) & free


def _feasible(a, hard):
    na = ~a
    for p, q in hard:
        if not ((a & p) | (na & q)):
            return False
    return True


def _value(a, soft):
    na = ~a
    v = 0.0
    for p, q, x in soft:
        if (a & p) | (na & q):
            v += x
    return v


def best(pos, neg, hard, w, fmask, fval, n, tol):
    """Return ``(best_value, witness, n_feasible)``; witness is -1 if none."""
    hc, sc = _split(pos, neg, hard, w)
    best_v, wit, nfeas = 0.0, -1, 0
    for a in _assignments(fmask, fval, n):
        if not _feasible(a, hc):
            continue
        nfeas += 1
        v = _value(a, sc)
        if wit < 0 or v > best_v + tol:
            best_v, wit = v, a
    return best_v, wit, nfeas


def optima(pos, neg, hard, w, fmask, fval, n, tol, limit):
    """Optimal assignments in enumeration order, at most ``limit`` (<0: all)."""
    b, wit, _ = best(pos, neg, hard, w, fmask, fval, n, tol)
    if wit < 0:
        return []
    hc, sc = _split(pos, neg, hard, w)
    out = []
    for a in _assignments(fmask, fval, n):
        if a < wit:
            continue
        if _feasible(a, hc) and _value(a, sc) >= b - tol:
            out.append(a)
            if 0 <= limit <= len(out):
                break
    return out


def count(pos, neg, fmask, fval, n):
    """Number of assignments extending the context that satisfy every clause."""
    clauses = list(zip(pos.tolist(), neg.tolist()))
    return sum(1 for a in _assignments(fmask, fval, n) if _feasible(a, clauses))


def evaluate_many(pos, neg, hard, w, xs):
    """Values and hard-feasibility flags for an array of assignments."""
    hc, sc = _split(pos, neg, hard, w)
    vals = np.empty(len(xs), dtype=np.float64)
    feas = np.empty(len(xs), dtype=np.uint8)
    for i, a in enumerate(xs.tolist()):
        vals[i] = _value(a, sc)
        feas[i] = _feasible(a, hc)
    return vals, feas


def diagnose(pos, neg, hard, w, n, cmask, cval, ex_ctx, ex_x, tol):
    """Predicted class per example: 0 positive, 1 infeasible, 2 sub-optimal.

    Also returns each context's optimum value and witness (-1 if infeasible).
    """
    hc, sc = _split(pos, neg, hard, w)
    nctx = len(cmask)
    cbest = np.zeros(nctx, dtype=np.float64)
    cwit = np.full(nctx, -1, dtype=np.int64)
    for c, (fm, fv) in enumerate(zip(cmask.tolist(), cval.tolist())):
        bv, wit = 0.0, -1
        for a in _assignments(fm, fv, n):
            if _feasible(a, hc):
                v = _value(a, sc)
                if wit < 0 or v > bv + tol:
                    bv, wit = v, a
        cbest[c] = bv
        cwit[c] = wit
    codes = np.zeros(len(ex_x), dtype=np.int8)
    for k, (c, a) in enumerate(zip(ex_ctx.tolist(), ex_x.tolist())):
        if cwit[c] < 0 or not _feasible(a, hc):
            codes[k] = INFEASIBLE
        elif _value(a, sc) < cbest[c] - tol:
            codes[k] = SUBOPTIMAL
    return codes, cbest, cwit


def score(pos, neg, hard, w, n, cmask, cval, ex_ctx, ex_x, ex_y, tol):
    """Number of examples whose label matches the model's classification."""
    codes, _, _ = diagnose(pos, neg, hard, w, n, cmask, cval, ex_ctx, ex_x, tol)
    return int(sum(1 for c, y in zip(codes.tolist(), ex_y.tolist()) if (c == 0) == bool(y)))
