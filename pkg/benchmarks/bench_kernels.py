#!/usr/bin/env python
"""Benchmark the nearest-neighbour kernels: compiled path vs numpy fallback.

Runs the same workload through both backends in subprocesses (backend
selection happens at import time via SPLITGUARD_NO_NUMBA) and prints a
small table. Sizes mirror the package's realistic use: a few hundred to
a few thousand 16-dimensional records.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

SIZES = ((300, 60), (900, 180), (3000, 600), (9000, 1800))
DIM = 16

_WORKER = r"""
import json, sys, time
import numpy as np
from splitguard import kernels

sizes = json.loads(sys.argv[1])
repeats = int(sys.argv[2])
rng = np.random.Generator(np.random.Philox(7))
out = {"backend": kernels.backend(), "rows": []}
for n_train, n_query in sizes:
    train = rng.normal(size=(n_train, %(dim)d))
    queries = rng.normal(size=(n_query, %(dim)d))
    kernels.nearest_index(train, queries)  # warm-up pays any compile cost
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernels.nearest_index(train, queries)
        best = min(best, time.perf_counter() - t0)
    out["rows"].append({"n_train": n_train, "n_query": n_query, "seconds": best})
print(json.dumps(out))
""" % {"dim": DIM}


def run_backend(force_numpy: bool, repeats: int) -> dict:
    env = dict(os.environ)
    if force_numpy:
        env["SPLITGUARD_NO_NUMBA"] = "1"
    else:
        env.pop("SPLITGUARD_NO_NUMBA", None)
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps(list(SIZES)), str(repeats)],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    compiled = run_backend(force_numpy=False, repeats=args.repeats)
    fallback = run_backend(force_numpy=True, repeats=args.repeats)

    print(f"compiled backend: {compiled['backend']}, fallback: {fallback['backend']}")
    print(f"{'train x query':>16} {'compiled (ms)':>14} {'numpy (ms)':>12} {'speedup':>8}")
    for row_c, row_f in zip(compiled["rows"], fallback["rows"]):
        label = f"{row_c['n_train']}x{row_c['n_query']}"
        ms_c = row_c["seconds"] * 1e3
        ms_f = row_f["seconds"] * 1e3
        ratio = ms_f / ms_c if ms_c > 0 else float("inf")
        print(f"{label:>16} {ms_c:>14.3f} {ms_f:>12.3f} {ratio:>7.1f}x")
    if compiled["backend"] == fallback["backend"]:
        print("note: compiled backend unavailable, both runs used numpy")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
