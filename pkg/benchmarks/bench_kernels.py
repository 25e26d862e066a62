"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from l0fourier import _fallback
from l0fourier.operators import MeasurementOperator, build_band_plan, k_adjoint, make_hermitian

try:
    from l0fourier import _kernels
except ImportError:
    _kernels = None


def cases():
    # (label, M, T, f_max, levels)
    yield "gaussian M=129 L=3", 129, 2.0, 7.5, 3
    yield "ricker M=168 L=3", 168, 1.344, 42.0, 3
    yield "layered M=280 L=3", 280, 2.24, 30.0, 3


def bench(mod, op, ksr, repeat):
    L, proj = op.framelet.levels, op.projector
    b = np.random.default_rng(0).normal(size=op.N)
    out = np.empty(op.N)
    gram = min(timeit.repeat(lambda: mod.gram_apply(b, L, proj, out), number=200,
                             repeat=repeat)) / 200
    n = 500

    def run():
        y, x = np.zeros(op.N), np.zeros(op.N)
        rec, h = np.zeros((n, _fallback.NCOL)), np.zeros(n, dtype=np.uint64)
        mod.el0m_run(ksr, y, x, 1e-4, 2e-4, L, proj, 1e-300, n, 0, 1e-12, rec, h)

    el0m = min(timeit.repeat(run, number=1, repeat=repeat)) / n
    return gram, el0m


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mods = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    print("case,backend,gram_us,el0m_iter_us")
    for label, M, T, fmax, L in cases():
        plan = build_band_plan(M, T, 1.0, fmax, snap=True)
        op = MeasurementOperator.build(plan, L)
        rng = np.random.default_rng(1)
        r = make_hermitian(plan, {k: complex(*rng.normal(size=2)) for k in plan.low_rows()})
        ksr = np.ascontiguousarray(k_adjoint(op, r))
        for name, mod in mods:
            g, e = bench(mod, op, ksr, args.repeat)
            print(f"{label},{name},{1e6 * g:.2f},{1e6 * e:.2f}")
    if _kernels is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
