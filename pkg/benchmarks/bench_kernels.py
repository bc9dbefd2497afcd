"""Compare the compiled enumeration kernels with the pure-Python fallback.

Run ``python3 benchmarks/bench_kernels.py [--n 10 12] [--repeat 3]``. Each row
times one kernel on identical packed inputs, checks both backends return the
same result, and reports the speed-up.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from ctxmaxsat import _pykernels
from ctxmaxsat.core import TOP, Assignment, ContextualExample, Dataset
from ctxmaxsat.datagen import GenSpec, gen_model, random_context
from ctxmaxsat.kernels import pack_model
from ctxmaxsat.sls import PackedData
from ctxmaxsat.solver import VALUE_TOL

try:
    from ctxmaxsat import _ckernels
except ImportError:
    _ckernels = None


def cases(n: int, seed: int):
    """``(name, args)`` pairs shared by both backends."""
    rng = np.random.default_rng(seed)
    spec = GenSpec(n=n, m_hard=5, m_soft=5, seed=seed)
    model = gen_model(spec, rng)
    packed = pack_model(model)
    psi = TOP
    xs = rng.integers(0, 1 << n, size=4096, dtype=np.int64)
    # a small labelled set in random contexts for the scoring kernels
    exs = []
    for _ in range(40):
        psi_k = random_context(n, n // 2, rng)
        x = psi_k.fixed_value | (int(rng.integers(1 << n)) & ~psi_k.fixed_mask)
        exs.append(ContextualExample(psi_k, Assignment(n, x), bool(rng.integers(2))))
    pd = PackedData(Dataset(n, tuple(exs)))
    score_args = (*packed, n, pd.cmask, pd.cval, pd.ex_ctx, pd.ex_x, pd.ex_y, VALUE_TOL)
    return [
        ("best", (*packed, psi.fixed_mask, psi.fixed_value, n, VALUE_TOL)),
        ("optima", (*packed, psi.fixed_mask, psi.fixed_value, n, VALUE_TOL, -1)),
        ("count", (packed[0], packed[1], psi.fixed_mask, psi.fixed_value, n)),
        ("evaluate_many", (*packed, xs)),
        ("score", score_args),
    ]


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[8, 10, 12])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'n':>3} {'kernel':<14} {'python ms':>10} {'compiled ms':>12} {'speed-up':>9}")
    for n in args.n:
        for name, fargs in cases(n, args.seed):
            py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
            if not same(py(*fargs), cy(*fargs)):
                print(f"MISMATCH in {name} at n={n}", file=sys.stderr)
                return 2
            t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat))
            t_cy = min(timeit.repeat(lambda: cy(*fargs), number=1, repeat=args.repeat))
            print(f"{n:>3} {name:<14} {t_py * 1e3:>10.2f} {t_cy * 1e3:>12.3f} "
                  f"{t_py / max(t_cy, 1e-9):>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
