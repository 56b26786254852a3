"""Benchmark of the stepping kernels: compiled extension vs NumPy fallback.

Run as `python -m surfsde.bench [--paths P] [--steps M] [--n-grid N]`.
Simulates the same ensemble with both implementations and reports wall time
and the maximum coordinate discrepancy.
"""

import argparse
import time

import numpy as np

from . import _kernels, galerkin, geometry, operators, spaces


def build_problem(n_grid=128, steps=200, n_dim=32, horizon=0.5):
    curve = geometry.dilating_circle(1.0, 0.5, "exp", horizon, n_grid)
    gram = spaces.GramPath.build(curve, steps)
    basis = galerkin.TimeBasis.build(gram, n=n_dim)
    noise = operators.NoiseModel(
        operators.noise_spectrum(0.3, n_dim), coupling="linear_multiplicative"
    )
    model = operators.StefanModel(operators.StefanNonlinearity(1, 1, 1), noise)
    return gram, basis, model


def run(paths=256, steps=200, n_grid=128, n_dim=32, repeats=3):
    """Time both kernels in the two regimes that occur in practice: one
    batched ensemble call (the NumPy twin vectorizes across paths there) and
    path-by-path stepping (where per-step interpreter overhead dominates the
    NumPy twin)."""
    gram, basis, model = build_problem(n_grid, steps, n_dim)
    x0 = galerkin.default_initial_coords(n_dim)
    results = {}
    coords = {}
    kernels = ["numpy"] + (["compiled"] if _kernels.compiled_available() else [])
    for kernel in kernels:
        best_batch = best_single = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            ens = galerkin.simulate_ensemble(
                gram, basis, model, x0, paths, master_seed=7, kernel=kernel
            )
            best_batch = min(best_batch, time.perf_counter() - t0)
            t0 = time.perf_counter()
            for i in range(min(paths, 32)):
                galerkin.simulate_path(gram, basis, model, x0, rng_seed=i, kernel=kernel)
            best_single = min(best_single, time.perf_counter() - t0)
        results[kernel] = {"batched": best_batch, "per_path": best_single}
        coords[kernel] = ens.coords
    return results, coords, min(paths, 32)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=256)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--n-grid", type=int, default=128)
    parser.add_argument("--n-dim", type=int, default=32)
    args = parser.parse_args(argv)

    results, coords, n_single = run(args.paths, args.steps, args.n_grid, args.n_dim)
    print(f"ensemble: paths={args.paths} steps={args.steps} N={args.n_grid} n={args.n_dim}")
    for kernel, times in results.items():
        rate = args.paths * args.steps / times["batched"]
        rate_s = n_single * args.steps / times["per_path"]
        print(
            f"  {kernel:>8}: batched {times['batched']:7.3f} s ({rate:,.0f} path-steps/s)"
            f"   per-path {times['per_path']:7.3f} s ({rate_s:,.0f} path-steps/s)"
        )
    if "compiled" in results:
        s_batch = results["numpy"]["batched"] / results["compiled"]["batched"]
        s_single = results["numpy"]["per_path"] / results["compiled"]["per_path"]
        gap = float(np.max(np.abs(coords["numpy"] - coords["compiled"])))
        print(
            f"  speedup: batched {s_batch:.2f}x, per-path {s_single:.2f}x;"
            f" max coordinate gap {gap:.3e}"
        )
    else:
        print("  compiled kernel not built; only the NumPy path was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
