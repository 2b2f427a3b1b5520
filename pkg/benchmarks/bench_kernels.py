#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

The solver selects its kernel backend at import time from the
``NSREG_NUMBA`` environment variable; this script imports both
implementations directly so one process can time them side by side.

Usage:
    python benchmarks/bench_kernels.py [--n 64] [--repeat 20]
"""

import argparse
import time

import numpy as np

from nsreg import _kernels


def timeit(fn, args, repeat):
    fn(*args)  # warm up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    u_phys = rng.standard_normal((3, n, n, n))
    grad_phys = rng.standard_normal((3, 3, n, n, n))
    vhat = (rng.standard_normal((3, n, n, n))
            + 1j * rng.standard_normal((3, n, n, n)))
    k = np.fft.fftfreq(n, 1.0 / n)
    gx = k[:, None, None]
    ksq = gx * gx + k[None, :, None] ** 2 + k[None, None, :] ** 2
    return u_phys, grad_phys, vhat, k, ksq


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="grid points per axis")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        ap.error("numba backend unavailable (NSREG_NUMBA=0 or numba missing); "
                 "nothing to compare")

    u_phys, grad_phys, vhat, k, ksq = make_inputs(args.n)
    cases = [
        ("convective_product",
         _kernels.convective_product_numpy,
         _kernels.convective_product_numba,
         (u_phys, grad_phys)),
        ("leray_project_modes",
         lambda v, kx, ky, kz: _kernels.leray_project_numpy(v.copy(), kx, ky, kz),
         lambda v, kx, ky, kz: _kernels.leray_project_numba(v.copy(), kx, ky, kz),
         (vhat, k, k, k)),
        ("weighted_spectral_sum",
         _kernels.weighted_spectral_sum_numpy,
         _kernels.weighted_spectral_sum_numba,
         (vhat, ksq, 1.0)),
    ]

    print(f"N = {args.n}^3, best of {args.repeat} runs")
    print(f"{'kernel':<24} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>9}")
    for name, np_fn, nb_fn, inputs in cases:
        t_np = timeit(np_fn, inputs, args.repeat)
        t_nb = timeit(nb_fn, inputs, args.repeat)
        print(f"{name:<24} {1e3 * t_np:>12.3f} {1e3 * t_nb:>12.3f} "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
