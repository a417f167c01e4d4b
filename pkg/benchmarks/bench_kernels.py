"""Compiled vs pure-Python kernels on typical workloads.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Prints one row per kernel with the best-of-N wall time of each
implementation and the speed-up. Results are checked to agree first.
"""
import argparse
import json
import math
import sys
import time

import numpy as np

from reiflab.domains import DomainSpec, rasterize
from reiflab.kernels import compiled_impl, python_impl


def best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def workloads(rng):
    # boundary slice of a snowflake, as seen by the line fit
    d = rasterize(DomainSpec.koch_flat(5, 4), 2e-4)
    P = d.boundary_in_ball((1.0, 0.0), 0.1)
    rel = P - np.array([1.0, 0.0])
    th = np.linspace(0, math.pi, 720, endpoint=False)
    lo = np.full(720, -0.1)
    hi = np.full(720, 0.1)
    t = np.sort(rng.uniform(-1, 1, 5000))
    o = rng.normal(scale=0.01, size=5000)
    A = rng.normal(size=(3000, 2))
    B = rng.normal(size=(3000, 2)) + 0.1
    disks = rasterize(DomainSpec.disks([(0, 0), (2.5, 0), (5, 0)], 1.0), 1e-3).grid
    hx = rng.normal(size=200_000)
    hy = rng.normal(size=200_000)
    order = np.lexsort((hy, hx))
    hx, hy = np.ascontiguousarray(hx[order]), np.ascontiguousarray(hy[order])
    return {
        "segment_gap (5k points)": lambda m: m.segment_gap(t, o, -1.0, 1.0),
        "deviation_sweep (720 angles)": lambda m: m.deviation_sweep(rel, th, lo, hi),
        "directed_hausdorff (3k x 3k)": lambda m: m.directed_hausdorff(A, B),
        "label_runs (3 disks, 1e-3)": lambda m: m.label_runs(disks.row_ptr, disks.starts, disks.ends),
        "hull_sorted (200k points)": lambda m: m.hull_sorted(hx, hy),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if compiled_impl is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    print(f"{'kernel':32s} {'cython s':>10s} {'python s':>10s} {'speed-up':>9s}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        if not same(fn(compiled_impl), fn(python_impl)):
            print(f"{name}: implementations disagree", file=sys.stderr)
            return 1
        tc = best_of(lambda: fn(compiled_impl), args.repeat)
        tp = best_of(lambda: fn(python_impl), args.repeat)
        rows.append({"kernel": name, "cython_s": tc, "python_s": tp, "speedup": tp / tc})
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}x")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
