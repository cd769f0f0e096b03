"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from l1interp.kernels import compiled_backend, python_backend
from l1interp.prior import ModelParams

PARAMS = ModelParams.sparse_model(0.3, 0.1, snr=2.0)
VALUES = np.array([v for v, _ in PARAMS.prior.atoms], dtype=float)
PROBS = np.array([p for _, p in PARAMS.prior.atoms], dtype=float)


def cases(k):
    rng = np.random.default_rng(0)
    X = np.asfortranarray(rng.standard_normal((100, 300)) / 10.0)
    y = rng.standard_normal(100)
    lam = 0.1 * float(np.max(np.abs(X.T @ y)))
    return {
        "solve_interp (fixed point, one delta)":
            lambda: k.solve_interp(VALUES, PROBS, 0.3, 1.0, 1e-14, 1.0, 1e-12),
        "solve_alpha x100":
            lambda: [k.solve_alpha(VALUES, PROBS, u, 0.3) for u in np.linspace(0.05, 0.9, 100)],
        "se_map x1000":
            lambda: [k.se_map(VALUES, PROBS, 2.0, z, 0.3, 1.0) for z in np.linspace(0, 3, 1000)],
        "lasso_cd 100x300":
            lambda: k.lasso_cd(X, y, lam, np.zeros(300), 1e-8, 100_000),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = python_backend()
    cy = compiled_backend()
    if cy is None:
        print("compiled backend not built; timing the Python fallback only")
    py_cases = cases(py)
    cy_cases = cases(cy) if cy is not None else {}
    print(f"{'kernel':40s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in py_cases.items():
        number = 1
        t_py = min(timeit.repeat(fn, number=number, repeat=args.repeat)) * 1e3
        if name in cy_cases:
            t_cy = min(timeit.repeat(cy_cases[name], number=number, repeat=args.repeat)) * 1e3
            print(f"{name:40s} {t_py:12.3f} {t_cy:12.3f} {t_py / t_cy:8.1f}x")
        else:
            print(f"{name:40s} {t_py:12.3f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
