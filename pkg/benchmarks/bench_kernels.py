"""Compare the compiled walk kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--count N] [--repeat R]

Both backends are run on identical arguments; their outputs are checked for
bit-identity before timings are reported.
"""

import argparse
import timeit

import numpy as np

from sigma_lab import _pykernels, kernels


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    compiled = kernels.BACKENDS.get("compiled")
    if compiled is None:
        print("compiled extension not built; only the numpy backend is available")
    cases = [
        ("walk_sums", 8, args.count),
        ("walk_sums", 64, args.count),
        ("abs_endpoints", 100, args.count),
        ("abs_endpoints", 400, args.count),
        ("abs_endpoints", 1600, args.count),
    ]
    print(f"{'kernel':<14} {'n':>5} {'count':>8} {'numpy s':>10} {'compiled s':>11} {'speedup':>8}")
    for name, n, count in cases:
        call = (7, 0, count, n)
        py_fn = getattr(_pykernels, name)
        t_py = bench(py_fn, call, args.repeat)
        if compiled is None:
            print(f"{name:<14} {n:>5} {count:>8} {t_py:>10.4f} {'-':>11} {'-':>8}")
            continue
        c_fn = getattr(compiled, name)
        assert np.array_equal(py_fn(*call), c_fn(*call)), f"{name} backends disagree"
        t_c = bench(c_fn, call, args.repeat)
        print(f"{name:<14} {n:>5} {count:>8} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
