"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from shiftbounds import _kernels_py

try:
    from shiftbounds import _kernels
except ImportError:
    _kernels = None

CASES = [
    # (kernel, prior nodes, columns, periodic); periodic band sums are square
    ("band_sum", 256, 256, True),
    ("band_sum", 1024, 1024, True),
    ("band_sum", 512, 768, False),
    ("correlate", 512, 1, True),
    ("correlate", 2048, 8, True),
    ("correlate", 1024, 4, False),
]


def make_inputs(kernel, n, cols, periodic, rng):
    """Periodic kernels need square / equal-length inputs; open ones take any width."""
    q = rng.random(n)
    q /= q.sum()
    if kernel == "band_sum":
        mat = rng.random((n, n if periodic else cols))
    else:
        mat = rng.random((n if periodic else n + n // 2, cols))
    return q, np.ascontiguousarray(mat), periodic


def best_time(fn, args, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-6)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10} {'n':>6} {'cols':>6} {'periodic':>8} {'python ms':>10} "
          f"{'cython ms':>10} {'speedup':>8}")
    for kernel, n, cols, periodic in CASES:
        inputs = make_inputs(kernel, n, cols, periodic, rng)
        py_fn, cy_fn = getattr(_kernels_py, kernel), getattr(_kernels, kernel)
        ref, got = py_fn(*inputs), cy_fn(*inputs)
        if not np.allclose(ref, got, rtol=1e-12, atol=1e-14):
            raise SystemExit(f"{kernel} backends disagree: max diff {np.max(np.abs(ref - got)):.3e}")
        t_py = best_time(py_fn, inputs, args.repeat)
        t_cy = best_time(cy_fn, inputs, args.repeat)
        print(f"{kernel:<10} {n:>6} {cols:>6} {str(periodic):>8} {1e3 * t_py:>10.3f} "
              f"{1e3 * t_cy:>10.3f} {t_py / t_cy:>8.2f}")


if __name__ == "__main__":
    main()
