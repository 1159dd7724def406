"""Benchmark the compiled scheduling kernels against the NumPy fallbacks.

The two hot paths are the GA decode (greedy placement of a window permutation,
called population x generations times per scheduling instance) and the
earliest-fit sweep used for reservations and backfill shadow checks.

Run:  python benchmarks/bench_kernels.py
The pure backend is loaded in a subprocess with DFPSCHED_PURE=1 so both
implementations are timed in one invocation.
"""

import json
import os
import subprocess
import sys
import time
import timeit

import numpy as np


def make_inputs(seed=0, n_jobs=10, n_res=2, caps=(64, 32), n_running=40):
    rng = np.random.default_rng(seed)
    requests = np.stack([
        rng.integers(1, c // 2 + 1, size=n_jobs) for c in caps
    ], axis=1).astype(np.int64)
    free = np.array([c // 3 for c in caps], dtype=np.int64)
    orders = [rng.permutation(n_jobs).astype(np.int64) for _ in range(64)]
    release_times = np.sort(rng.uniform(0, 1e4, size=n_running))
    release_amounts = np.stack([
        rng.integers(0, 5, size=n_running) for _ in caps
    ], axis=1).astype(np.int64)
    big_req = np.array([c for c in caps], dtype=np.int64) // 2
    return requests, free, orders, release_times, release_amounts, big_req


def run_once(repeat=2000):
    from dfpsched import _kernels

    requests, free, orders, rel_t, rel_a, big_req = make_inputs()

    def placement():
        for order in orders:
            _kernels.greedy_placement(requests, free, order)

    def fit():
        _kernels.earliest_fit(free, big_req, rel_t, rel_a, 0.0)

    t_place = min(timeit.repeat(placement, number=repeat // 10, repeat=3))
    t_fit = min(timeit.repeat(fit, number=repeat, repeat=3))
    return {
        "backend": _kernels.BACKEND,
        "greedy_placement_us": 1e6 * t_place / (repeat // 10) / len(orders),
        "earliest_fit_us": 1e6 * t_fit / repeat,
    }


def main():
    if os.environ.get("_BENCH_CHILD") == "1":
        print(json.dumps(run_once()))
        return
    results = [run_once()]
    env = dict(os.environ, DFPSCHED_PURE="1", _BENCH_CHILD="1")
    out = subprocess.run([sys.executable, __file__], env=env,
                         capture_output=True, text=True, check=True)
    results.append(json.loads(out.stdout.strip().splitlines()[-1]))

    print(f"{'backend':<10} {'greedy_placement':>18} {'earliest_fit':>14}")
    for r in results:
        print(f"{r['backend']:<10} {r['greedy_placement_us']:>15.2f} us "
              f"{r['earliest_fit_us']:>11.2f} us")
    if len({r["backend"] for r in results}) == 2:
        by = {r["backend"]: r for r in results}
        for key in ("greedy_placement_us", "earliest_fit_us"):
            speedup = by["numpy"][key] / by["cython"][key]
            print(f"{key.removesuffix('_us')}: cython is {speedup:.1f}x faster")
    else:
        print("compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
