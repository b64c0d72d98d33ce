"""Compare the numba and numpy SMO kernels on synthetic training sets.

Usage:
    python3 benchmarks/bench_smo.py [--sizes 64,128,256,512] [--dims 16]
                                    [--repeats 3] [--seed 0]

Trains one binary RBF machine per size with both kernels and reports wall
time plus the speedup ratio.  The first numba call includes JIT
compilation; a warmup run is done up front so the table reflects steady
state.  Models from the two kernels are checked for exact agreement on
the full-Gram path while we are at it.
"""

import argparse
import time

import numpy as np

from lamper._kernels import HAVE_NUMBA, smo_solve
from lamper.svm import resolve_gamma


def make_problem(rng, n, d):
    half = n // 2
    a = rng.normal(-0.6, 1.0, (half, d))
    b = rng.normal(0.6, 1.0, (n - half, d))
    X = np.vstack([a, b])
    y = np.asarray([-1.0] * half + [1.0] * (n - half))
    return X, y


def run_once(X, y, gamma, force):
    start = time.perf_counter()
    alpha, bias, updates, converged = smo_solve(
        X, y, 1.0, gamma, 1e-3, 10, 1_000_000, force=force)
    return time.perf_counter() - start, alpha, bias, updates, converged


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="64,128,256,512",
                        help="comma-separated training-set sizes")
    parser.add_argument("--dims", type=int, default=16,
                        help="feature dimension")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timed repetitions per size (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy kernel can run")
        return 1

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(args.seed)

    # JIT warmup outside the timed region
    Xw, yw = make_problem(rng, 16, args.dims)
    run_once(Xw, yw, resolve_gamma("scale", Xw), "numba")

    print(f"{'n':>6} {'updates':>8} {'numba (s)':>10} {'numpy (s)':>10} "
          f"{'speedup':>8}  identical")
    for n in sizes:
        X, y = make_problem(rng, n, args.dims)
        gamma = resolve_gamma("scale", X)
        best = {}
        outputs = {}
        for force in ("numba", "numpy"):
            times = []
            for _ in range(args.repeats):
                elapsed, alpha, bias, updates, converged = run_once(
                    X, y, gamma, force)
                times.append(elapsed)
            best[force] = min(times)
            outputs[force] = (alpha, bias, updates, converged)
        a_nb, b_nb, u_nb, _ = outputs["numba"]
        a_np, b_np, u_np, _ = outputs["numpy"]
        same = np.array_equal(a_nb, a_np) and b_nb == b_np and u_nb == u_np
        print(f"{n:>6} {u_nb:>8} {best['numba']:>10.4f} {best['numpy']:>10.4f} "
              f"{best['numpy'] / best['numba']:>7.1f}x  {'yes' if same else 'NO'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
