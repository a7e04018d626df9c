"""Compare the numba and numpy paths of the CRN hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeats 20]

Both paths are imported side by side, so the ``CRNKIT_DISABLE_NUMBA`` flag
does not matter here; it only picks which path the library dispatches to.
"""
import argparse
import time

import numpy as np

from crnkit.kernels import HAVE_NUMBA, numba_impl, numpy_impl

SHAPES = [
    # (R, n, K, F, t, k): rows, objects, object length, width, draws, subset size
    (8, 16, 1, 64, 2, 8),
    (1, 20, 12, 64, 2, 10),
    (24, 14, 1, 512, 2, 12),
]


def timed(fn, repeats):
    fn()  # compile / warm caches
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples)) * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba not importable; only the numpy path exists")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'shape':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for R, n, K, F, t, k in SHAPES:
        x = rng.normal(size=(R, n, K, F))
        idx = np.stack([rng.choice(n, size=k, replace=False) for _ in range(t)]).astype(np.int64)
        g = rng.normal(size=(R, t, K, F))
        cases = {
            "subset_mean": lambda impl: impl.subset_mean(x, idx),
            "subset_mean_grad": lambda impl: impl.subset_mean_grad(g, idx, n),
            "elu": lambda impl: impl.elu(x),
            "elu_grad": lambda impl: impl.elu_grad(x, x),
        }
        for name, call in cases.items():
            np.testing.assert_allclose(call(numba_impl), call(numpy_impl), rtol=1e-12, atol=1e-12)
            a = timed(lambda: call(numpy_impl), args.repeats)
            b = timed(lambda: call(numba_impl), args.repeats)
            shape = f"R{R} n{n} K{K} F{F} t{t} k{k}"
            print(f"{name:<18}{shape:<28}{a:>10.3f}{b:>10.3f}{a / b:>8.1f}x")


if __name__ == "__main__":
    main()
