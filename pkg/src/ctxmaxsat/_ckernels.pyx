# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
from libc.stdlib cimport malloc, free

ctypedef long long i64

INFEASIBLE = 1
SUBOPTIMAL = 2


cdef struct Packed:
    int nh
    int ns
    i64 *hp
    i64 *hn
    i64 *sp
    i64 *sn
    double *sw


cdef Packed _pack(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard,
                  const double[:] w) except *:
    cdef Packed P
    cdef Py_ssize_t m = pos.shape[0], j
    P.nh = 0
    P.ns = 0
    P.hp = <i64 *> malloc((m + 1) * sizeof(i64))
    P.hn = <i64 *> malloc((m + 1) * sizeof(i64))
    P.sp = <i64 *> malloc((m + 1) * sizeof(i64))
    P.sn = <i64 *> malloc((m + 1) * sizeof(i64))
    P.sw = <double *> malloc((m + 1) * sizeof(double))
    if P.hp == NULL or P.hn == NULL or P.sp == NULL or P.sn == NULL or P.sw == NULL:
        raise MemoryError()
    for j in range(m):
        if hard[j]:
            P.hp[P.nh] = pos[j]
            P.hn[P.nh] = neg[j]
            P.nh += 1
        elif w[j] != 0.0:
            P.sp[P.ns] = pos[j]
            P.sn[P.ns] = neg[j]
            P.sw[P.ns] = w[j]
            P.ns += 1
    return P


cdef void _release(Packed *P):
    free(P.hp)
    free(P.hn)
    free(P.sp)
    free(P.sn)
    free(P.sw)


cdef inline bint _feasible(i64 a, Packed *P) nogil:
    cdef int j
    cdef i64 na = ~a
    for j in range(P.nh):
        if ((a & P.hp[j]) | (na & P.hn[j])) == 0:
            return False
    return True


cdef inline double _value(i64 a, Packed *P) nogil:
    cdef int j
    cdef i64 na = ~a
    cdef double v = 0.0
    for j in range(P.ns):
        if (a & P.sp[j]) | (na & P.sn[j]):
            v += P.sw[j]
    return v


cdef void _best(Packed *P, i64 fmask, i64 fval, int n, double tol,
                double *best_v, i64 *wit, i64 *nfeas) nogil:
    cdef i64 free_ = (((<i64> 1) << n) - 1) & ~fmask
    cdef i64 s = 0, a
    cdef double v
    best_v[0] = 0.0
    wit[0] = -1
    nfeas[0] = 0
    while True:
        a = fval | s
        if _feasible(a, P):
            nfeas[0] += 1
            v = _value(a, P)
            if wit[0] < 0 or v > best_v[0] + tol:
                best_v[0] = v
                wit[0] = a
        if s == free_:
            break
        s = (s - free_) & free_


def best(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard, const double[:] w,
         i64 fmask, i64 fval, int n, double tol):
    cdef Packed P = _pack(pos, neg, hard, w)
    cdef double bv
    cdef i64 wit, nfeas
    try:
        with nogil:
            _best(&P, fmask, fval, n, tol, &bv, &wit, &nfeas)
    finally:
        _release(&P)
    return bv, wit, nfeas


def optima(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard, const double[:] w,
           i64 fmask, i64 fval, int n, double tol, i64 limit):
    cdef Packed P = _pack(pos, neg, hard, w)
    cdef double bv
    cdef i64 wit, nfeas, s, a, free_, got = 0
    out = []
    try:
        _best(&P, fmask, fval, n, tol, &bv, &wit, &nfeas)
        if wit < 0:
            return out
        free_ = (((<i64> 1) << n) - 1) & ~fmask
        s = wit & free_
        while True:
            a = fval | s
            if _feasible(a, &P) and _value(a, &P) >= bv - tol:
                out.append(a)
                got += 1
                if 0 <= limit <= got:
                    break
            if s == free_:
                break
            s = (s - free_) & free_
    finally:
        _release(&P)
    return out


def count(const i64[:] pos, const i64[:] neg, i64 fmask, i64 fval, int n):
    cdef Py_ssize_t m = pos.shape[0], j
    cdef i64 free_ = (((<i64> 1) << n) - 1) & ~fmask
    cdef i64 s = 0, a, na, total = 0
    cdef bint ok
    with nogil:
        while True:
            a = fval | s
            na = ~a
            ok = True
            for j in range(m):
                if ((a & pos[j]) | (na & neg[j])) == 0:
                    ok = False
                    break
            if ok:
                total += 1
            if s == free_:
                break
            s = (s - free_) & free_
    return total


def evaluate_many(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard,
                  const double[:] w, const i64[:] xs):
    cdef Packed P = _pack(pos, neg, hard, w)
    cdef Py_ssize_t i, k = xs.shape[0]
    vals = np.empty(k, dtype=np.float64)
    feas = np.empty(k, dtype=np.uint8)
    cdef double[:] vv = vals
    cdef unsigned char[:] ff = feas
    try:
        for i in range(k):
            vv[i] = _value(xs[i], &P)
            ff[i] = _feasible(xs[i], &P)
    finally:
        _release(&P)
    return vals, feas


cdef void _diagnose(Packed *P, int n, const i64[:] cmask, const i64[:] cval,
                    const i64[:] ex_ctx, const i64[:] ex_x, double tol,
                    signed char[:] codes, double[:] cbest, i64[:] cwit) noexcept nogil:
    cdef Py_ssize_t c, k
    cdef i64 nfeas, a
    for c in range(cmask.shape[0]):
        _best(P, cmask[c], cval[c], n, tol, &cbest[c], &cwit[c], &nfeas)
    for k in range(ex_x.shape[0]):
        c = ex_ctx[k]
        a = ex_x[k]
        if cwit[c] < 0 or not _feasible(a, P):
            codes[k] = 1
        elif _value(a, P) < cbest[c] - tol:
            codes[k] = 2
        else:
            codes[k] = 0


def diagnose(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard, const double[:] w,
             int n, const i64[:] cmask, const i64[:] cval, const i64[:] ex_ctx,
             const i64[:] ex_x, double tol):
    cdef Packed P = _pack(pos, neg, hard, w)
    codes = np.zeros(ex_x.shape[0], dtype=np.int8)
    cbest = np.zeros(cmask.shape[0], dtype=np.float64)
    cwit = np.full(cmask.shape[0], -1, dtype=np.int64)
    try:
        _diagnose(&P, n, cmask, cval, ex_ctx, ex_x, tol, codes, cbest, cwit)
    finally:
        _release(&P)
    return codes, cbest, cwit


def score(const i64[:] pos, const i64[:] neg, const unsigned char[:] hard, const double[:] w,
          int n, const i64[:] cmask, const i64[:] cval, const i64[:] ex_ctx, const i64[:] ex_x,
          const unsigned char[:] ex_y, double tol):
    cdef Packed P = _pack(pos, neg, hard, w)
    cdef Py_ssize_t k, s = ex_x.shape[0]
    cdef i64 total = 0
    codes = np.zeros(s, dtype=np.int8)
    cbest = np.zeros(cmask.shape[0], dtype=np.float64)
    cwit = np.full(cmask.shape[0], -1, dtype=np.int64)
    cdef signed char[:] cc = codes
    try:
        _diagnose(&P, n, cmask, cval, ex_ctx, ex_x, tol, codes, cbest, cwit)
        for k in range(s):
            if (cc[k] == 0) == (ex_y[k] != 0):
                total += 1
    finally:
        _release(&P)
    return total
