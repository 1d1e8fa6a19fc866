"""Compare the compiled and numpy paths of the polynomial-times-Gaussian kernel.

Every quadrature in the package funnels through this evaluation, so its
throughput bounds the cost of Wightman functionals.  Run with

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

The two paths are checked for agreement before timing.
"""
import argparse
import time

import numpy as np

from wightrec import _kernels
from wightrec.testfn import GaussPolyFn


def make_function(rng, dim, terms):
    m = rng.normal(size=(dim, dim))
    quad = m @ m.T / dim + 0.6 * np.eye(dim)
    powers = rng.integers(0, 3, size=(terms, dim))
    coeffs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return GaussPolyFn(coeffs, powers, quad, rng.normal(size=dim), block=2)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or WIGHTREC_DISABLE_NUMBA set): only the numpy path is timed")
    rng = np.random.default_rng(0)
    print(f"{'dim':>4} {'terms':>6} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8}")
    for dim, terms in [(2, 1), (2, 6), (4, 4), (6, 8), (8, 16)]:
        f = make_function(rng, dim, terms)
        z = rng.normal(size=(args.points, dim)) + 0.1j * rng.normal(size=(args.points, dim))
        phase = np.zeros(dim, dtype=np.complex128)
        args_np = (f.coeffs, f.powers, f.quad, f.center, z)
        t_np = best_of(lambda: _kernels.gauss_poly_eval_numpy(*args_np), args.repeat)
        if _kernels.HAVE_NUMBA:
            ref = _kernels.gauss_poly_eval_numpy(*args_np)
            got = _kernels.gauss_poly_eval_numba(*args_np, phase)  # also triggers compilation
            scale = np.abs(ref).max()
            assert np.abs(got - ref).max() <= 1e-12 * scale, "kernel paths disagree"
            t_nb = best_of(lambda: _kernels.gauss_poly_eval_numba(*args_np, phase), args.repeat)
            print(f"{dim:>4} {terms:>6} {t_np:>11.4f} {t_nb:>11.4f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{dim:>4} {terms:>6} {t_np:>11.4f} {'-':>11} {'-':>8}")


if __name__ == "__main__":
    main()
