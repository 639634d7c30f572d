"""Time the numba kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 20 40 80] [--repeat 20]

Each kernel is warmed up once so JIT compilation is excluded, then timed as
the best of ``--repeat`` runs. Outputs of the two backends are compared so a
speedup is never reported for a kernel that disagrees.
"""
import argparse
import timeit

import numpy as np

from sensalign import _kernels


def cases(n, rng):
    X = rng.uniform(0, 50, size=(n, 3))
    A = rng.normal(size=(n, n))
    M = A + A.T
    nbrs = _kernels.numpy_impl.knn(X, 3)
    return {
        "knn": (lambda impl: impl.knn(X, 3)),
        "lle_weights": (lambda impl: impl.lle_weights(X, nbrs, 1e-3)[0]),
        "eigh": (lambda impl: impl.eigh(M)[0]),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 80])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if _kernels.numba_impl is None:
        print("numba unavailable; nothing to compare")
        return 1
    _kernels.warmup()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<12} {'n':>4} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}  agree")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            ref = fn(_kernels.numpy_impl)
            got = fn(_kernels.numba_impl)
            agree = np.allclose(ref, got, atol=1e-9)
            t_np = min(timeit.repeat(lambda: fn(_kernels.numpy_impl), number=1, repeat=args.repeat))
            t_nb = min(timeit.repeat(lambda: fn(_kernels.numba_impl), number=1, repeat=args.repeat))
            print(f"{name:<12} {n:>4} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>7.2f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
