"""Timing of the compiled kernels against the NumPy fallback.

Run ``python3 benchmarks/bench_kernels.py [--samples N] [--rank R]``.
"""

import argparse
import timeit

import numpy as np

from ttrram import _kernels_py, kernels

try:
    from ttrram import _ckernels
except ImportError:
    _ckernels = None


def setup(m, d, n, r, seed=0):
    rng = np.random.default_rng(seed)
    ranks = (1,) + (r,) * (d - 1) + (1,)
    cores = [rng.standard_normal((ranks[k], n, ranks[k + 1])) for k in range(d)]
    idx = rng.integers(0, n, size=(m, d))
    y = rng.standard_normal(m)
    return cores, idx, y


def cases(cores, idx, y):
    d = len(cores)
    k = d // 2
    L = kernels.left_interfaces(cores, idx)
    R = kernels.right_interfaces(cores, idx)
    n = cores[k].shape[1]
    return {
        "gather": lambda impl: kernels.gather(cores, idx, impl=impl),
        "core_values": lambda impl: kernels.core_values(L[k], cores[k], R[k + 1], idx[:, k], impl=impl),
        "accumulate_core": lambda impl: kernels.accumulate_core(L[k], R[k + 1], y, idx[:, k], n, impl=impl),
        "accumulate_pair": lambda impl: kernels.accumulate_pair(
            L[k], R[k + 2], y, idx[:, k], idx[:, k + 1], n, n, impl=impl
        ),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--order", type=int, default=4)
    ap.add_argument("--size", type=int, default=20)
    ap.add_argument("--rank", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the NumPy backend is timed")
    cores, idx, y = setup(args.samples, args.order, args.size, args.rank)
    impls = [("python", _kernels_py)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"m={args.samples} d={args.order} n={args.size} r={args.rank}")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in impls) + f"{'speedup':>10}")
    for name, fn in cases(cores, idx, y).items():
        times = []
        for _, impl in impls:
            fn(impl)
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<18}" + "".join(f"{1e3 * t:>10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
