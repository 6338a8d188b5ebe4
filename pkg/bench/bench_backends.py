"""Compare the numba and pure-numpy kernel backends.

Times the three pairwise primitives (matrix assembly, matrix-free potential
application, quadratic form) on cylinder grids of growing size, once per
backend. Selection goes through the same HEISHLS_BACKEND environment switch
the library uses, so what is measured is exactly what ships.

Usage: python bench/bench_backends.py [--max-n 20000] [--alpha 2.0]
"""

import argparse
import os
import time

import numpy as np

from heishls import _backend
from heishls.domain import build_grid, cylinder
from heishls.kernel import KernelSpec, self_coefficients


def time_call(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-n", type=int, default=20000, help="largest grid size to time")
    ap.add_argument("--alpha", type=float, default=2.0)
    args = ap.parse_args()

    spec = KernelSpec(n=1, alpha=args.alpha)
    rng = np.random.default_rng(0)

    grids = []
    for h in (0.4, 0.2, 0.1, 0.05):
        g = build_grid(cylinder(1, 1.0), h)
        if g.size <= args.max_n:
            grids.append(g)

    print(f"{'N':>8} {'op':<10} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9}")
    for g in grids:
        pts = g.points
        a = rng.uniform(0.1, 1.0, g.size) * g.weights
        diag = self_coefficients(g, spec) / g.weights
        ops = {
            "matrix": lambda: _backend.kernel_matrix(pts, 1, spec.exponent, diag),
            "apply": lambda: _backend.potential_apply(pts, 1, spec.exponent, a, diag * a),
            "quad": lambda: _backend.quad_form(pts, 1, spec.exponent, a),
        }
        for name, fn in ops.items():
            times = {}
            values = {}
            for backend in ("numba", "numpy"):
                os.environ["HEISHLS_BACKEND"] = backend
                fn()  # warm (JIT compile / cache touch)
                times[backend] = time_call(fn)
                out = fn()
                values[backend] = float(np.sum(out)) if hasattr(out, "sum") else float(out)
            rel = abs(values["numba"] - values["numpy"]) / max(abs(values["numpy"]), 1e-300)
            assert rel < 1e-10, f"backend mismatch on {name}: {rel}"
            print(
                f"{g.size:>8} {name:<10} {times['numba']:>12.4f} {times['numpy']:>12.4f}"
                f" {times['numpy'] / times['numba']:>8.1f}x"
            )
    os.environ.pop("HEISHLS_BACKEND", None)


if __name__ == "__main__":
    main()
