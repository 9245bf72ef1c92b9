"""Benchmark the finite-volume update kernel: compiled extension vs NumPy.

Run from the repository root:

    python benchmarks/bench_kernels.py [--cells 200000] [--repeats 200]

Both implementations are exercised on identical inputs; the script reports
per-call timings and verifies that results agree bitwise.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from amyprion import _fvkernel_py
from amyprion.kernels import HAVE_COMPILED

try:
    from amyprion import _fvkernel
except ImportError:
    _fvkernel = None


def make_inputs(cells: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0.0, 1.0, cells)
    dx = np.full(cells, 1e-2)
    edge_vel = rng.uniform(0.1, 1.0, cells + 1)
    mu = np.full(cells, 0.8)
    dt = 1e-3
    influx = 0.5
    return f, dx, edge_vel, mu, influx, dt


def bench(step, cells: int, repeats: int) -> tuple[float, np.ndarray]:
    f, dx, edge_vel, mu, influx, dt = make_inputs(cells)
    out = np.empty_like(f)
    step(f, dx, edge_vel, mu, influx, dt, out)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        step(f, dx, edge_vel, mu, influx, dt, out)
        best = min(best, time.perf_counter() - t0)
    return best, out.copy()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    t_py, out_py = bench(_fvkernel_py.upwind_step, args.cells, args.repeats)
    print(f"numpy fallback : {t_py * 1e6:10.1f} us/call  ({args.cells} cells)")

    if _fvkernel is None:
        print("compiled       : unavailable (extension not built)")
        return

    t_c, out_c = bench(_fvkernel.upwind_step, args.cells, args.repeats)
    print(f"compiled       : {t_c * 1e6:10.1f} us/call  ({args.cells} cells)")
    print(f"speedup        : {t_py / t_c:10.2f}x")
    same = np.array_equal(out_py, out_c)
    print(f"bitwise equal  : {same}")
    if not same:
        diff = np.max(np.abs(out_py - out_c))
        print(f"max |diff|     : {diff:.3e}")
    print(f"auto-selected  : {'compiled' if HAVE_COMPILED else 'numpy fallback'}")


if __name__ == "__main__":
    main()
