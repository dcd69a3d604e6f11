"""Throughput comparison of the compiled path kernel against the numpy one.

Runs the same batches through both backends (identical draws, so the work is
identical by construction), reports paths/second and the speedup, and checks
that the outputs agree before trusting either number.

Usage: python benchmarks/benchmark_backends.py [--n 20000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from fraclab.backend import backend_name, compile_integrand, run_path_batch
from fraclab.model import FullSpace, GaussBump, Interval, TimeExp

_CASES = {
    "interval exit, alpha=2": dict(
        alpha=2.0, beta=0.6, domain=Interval(0.0, 2.0), t_bar=0.5,
        x0=np.array([0.7]), h=2e-3),
    "interval exit, alpha=1.5": dict(
        alpha=1.5, beta=0.6, domain=Interval(0.0, 2.0), t_bar=0.5,
        x0=np.array([0.7]), h=2e-3),
    "free space + discounted integrand": dict(
        alpha=2.0, beta=0.5, domain=FullSpace(1), t_bar=1.0,
        x0=np.zeros(1), h=1e-3, lam=1.0),
    "subordinator only (time_only)": dict(
        alpha=2.0, beta=0.5, domain=FullSpace(1), t_bar=1.0,
        x0=np.zeros(1), h=1e-3, time_only=True),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000, help="paths per case")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions, best kept")
    args = ap.parse_args()

    if backend_name(force_fallback=False) != "compiled":
        print("compiled kernel unavailable; nothing to compare")
        return 1

    integrand = CompiledIntegrand.from_field(
        Product(TimeExp(1.0), GaussBump(0.0, 1.0)), FullSpace(1))

    print(f"{'case':40s} {'compiled':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, case in _CASES.items():
        kw = dict(case)
        if label.startswith("free space"):
            kw["integrand"] = integrand
        times = {}
        for backend, force in (("compiled", False), ("numpy", True)):
            best = math.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                out = run_path_batch(
                    max_steps=10_000_000, n=args.n, seed=42, stream_id=7,
                    force_fallback=force, **kw)
                best = min(best, time.perf_counter() - t0)
            times[backend] = best
            if backend == "compiled":
                ref = out
            else:
                same_steps = np.array_equal(ref["steps"], out["steps"])
                close = np.allclose(ref["tau0"], out["tau0"], rtol=1e-9, atol=1e-12,
                                    equal_nan=True)
                if not (same_steps and close):
                    print(f"{label}: BACKEND MISMATCH, timings not comparable")
                    return 1
        rate_c = args.n / times["compiled"]
        rate_n = args.n / times["numpy"]
        print(f"{label:40s} {rate_c:8.0f}/s {rate_n:8.0f}/s {times['numpy'] / times['compiled']:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
