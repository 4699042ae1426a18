"""Time the numba kernels against their pure-numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is called once
before timing so that compilation is excluded.
"""

import argparse
import math
import time

import numpy as np

from ssblab.codes import nearest_codewords
from ssblab.channel import flip_probability_theoretical
from ssblab.lattice import LatticeParams
from ssblab.numerics import symmetric_eigen


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(eigen_n):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((eigen_n, eigen_n))
    sym = (a + a.T) / 2
    registry = rng.integers(0, 2, size=(1000, 128))
    received = rng.integers(0, 2, size=(1000, 128))
    params = LatticeParams(1.6, 0.8)
    return {
        f"jacobi eigen n={eigen_n}": lambda b: symmetric_eigen(sym, want_vectors=True, backend=b),
        "flip quadrature (1.6, 0.8) x 5 sigmas": lambda b: [
            flip_probability_theoretical(params, s, backend=b) for s in (0.1, 0.21, 0.42, 1.0, 2.0)
        ],
        "hamming nearest 1000 x 1000 x 128 bits": lambda b: nearest_codewords(received, registry, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eigen-n", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':42s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, fn in cases(args.eigen_n).items():
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        ratio = t_np / t_nb if t_nb > 0 else math.inf
        print(f"{name:42s} {t_nb:10.4f} {t_np:10.4f} {ratio:8.1f}x")


if __name__ == "__main__":
    main()
