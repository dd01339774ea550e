"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from edmspace import kernels


def bench(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    opts = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = []
    for B, Y, d in [(1000, 2, 1), (256, 1000, 2), (64, 256, 64), (4096, 9, 2)]:
        x = rng.normal(size=(B, d)) * 2.0
        data = rng.normal(size=(Y, d))
        cases.append((f"mixture_denoise B={B} Y={Y} d={d}", kernels.mixture_denoise_numba,
                      kernels.mixture_denoise_numpy, (x, data, 0.7)))
    A = np.array([[0.9, -0.3], [0.3, 0.9]])
    c = np.array([0.5, -1.0])
    for H in (16, 64, 256):
        img = rng.normal(size=(H, H, 3))
        cases.append((f"affine_resample {H}x{H}x3", kernels.affine_resample_numba,
                      kernels.affine_resample_numpy, (img, A, c)))

    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fast, ref, args in cases:
        t_fast = bench(fast, args, opts.repeat)
        t_ref = bench(ref, args, opts.repeat)
        diff = np.max(np.abs(fast(*args) - ref(*args)))
        print(f"{name:40s} {1e3 * t_fast:10.3f} {1e3 * t_ref:10.3f} {t_ref / t_fast:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
