"""Throughput comparison of the compiled and pure-Python kernel backends.

Times the hot per-step kernels (exp_step, euler_step, kl_sum, a_norm_sq,
fv_step_upwind) on a realistic grid size and a full integrator loop through
the public API. Run after `pip install -e .`:

    python benchmarks/backend_bench.py --n 1025 --repeats 200
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from frflow import _kernels_py
from frflow.grid_measure import build_grid, gaussian_measure


def _load_compiled():
    try:
        from frflow import _kernels
        return _kernels
    except ImportError:
        return None


def _bench(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases(kern, grid, m, pi):
    w = grid.weights
    log_m = m.log_density.copy()
    target = pi.log_density.copy()
    a = (m.log_density - pi.log_density)
    a = a - np.sum(w * a * m.density)
    lam = math.exp(-0.5 * 1e-3)
    return {
        "kl_sum": lambda: kern.kl_sum(w, m.density, pi.density),
        "a_norm_sq": lambda: kern.a_norm_sq(w, a, m.density),
        "exp_step": lambda: kern.exp_step(log_m, target, lam, w),
        "euler_step": lambda: kern.euler_step(m.density, a, 1e-3, w),
        "fv_step_upwind": lambda: kern.fv_step_upwind(
            m.density, a, grid.h, w, 1e-5),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1025, help="grid nodes")
    parser.add_argument("--repeats", type=int, default=200,
                        help="timing repeats (best-of)")
    args = parser.parse_args(argv)

    grid = build_grid(-8.0, 8.0, args.n)
    m = gaussian_measure(grid, 1.0, 1.0)
    pi = gaussian_measure(grid, 0.0, 1.0)

    compiled = _load_compiled()
    backends = [("python", _kernels_py)]
    if compiled is not None:
        backends.append(("compiled", compiled))
    else:
        print("compiled backend unavailable; timing python only")

    results: dict[str, dict[str, float]] = {}
    for name, kern in backends:
        cases = _kernel_cases(kern, grid, m, pi)
        results[name] = {label: _bench(fn, args.repeats)
                         for label, fn in cases.items()}

    width = max(len(k) for k in results["python"])
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n, _ in backends)
    if compiled is not None:
        header += f"{'speedup':>10}"
    print(header)
    for label in results["python"]:
        row = f"{label:<{width}}  "
        for name, _ in backends:
            row += f"{results[name][label] * 1e6:>10.2f}us"
        if compiled is not None:
            row += f"{results['python'][label] / results['compiled'][label]:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
