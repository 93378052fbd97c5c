"""Compiled vs pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the ADMM rate solve (N = 5, 50, 500), the channel auction on the
default radio model, and one full default simulation under each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from twotimescale import _backend, _pycore
from twotimescale.acceptance import matching_instance
from twotimescale.config import default_config
from twotimescale.controller import run
from twotimescale.rates import RateProblem

KERNELS = ("block_solve", "admm_solve", "demand_sets", "price_auction")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def admm_case(n, rng):
    p = RateProblem.from_state(rng.uniform(0.5, 20, n), rng.uniform(0.1, 0.3, n), 100.0, 1.0, 20.0)
    s = p.split
    return (p.queue_weights, p.utility_weights, 20.0, s, p.rho, 1e-4, 1e-4, 500,
            np.zeros(s), np.zeros(n - s), 0.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _backend.BACKEND != "cython":
        print("compiled extension not available; only the pure backend can be timed")
    fast, slow = _backend.kernels, _pycore
    rng = np.random.default_rng(0)
    rows = []

    for n in (5, 50, 500):
        cases = [admm_case(n, rng) for _ in range(20)]
        tf = best_of(lambda: [fast.admm_solve(*c) for c in cases], args.repeat) / len(cases)
        ts = best_of(lambda: [slow.admm_solve(*c) for c in cases], args.repeat) / len(cases)
        rows.append((f"admm_solve N={n}", tf, ts))

    insts = [matching_instance(rng, 5, 12) for _ in range(50)]
    dl = [0.01 * float(np.median(np.abs(f))) for f in insts]
    tf = best_of(lambda: [fast.price_auction(f, 3, d, 10**7) for f, d in zip(insts, dl)],
                 args.repeat) / len(insts)
    ts = best_of(lambda: [slow.price_auction(f, 3, d, 10**7) for f, d in zip(insts, dl)],
                 args.repeat) / len(insts)
    rows.append(("price_auction 5x12 q=3", tf, ts))

    cfg = default_config()
    tf = best_of(lambda: run(cfg), 1)
    saved = {k: getattr(_backend, k) for k in KERNELS}
    try:
        for k in KERNELS:
            setattr(_backend, k, getattr(_pycore, k))
        ts = best_of(lambda: run(cfg), 1)
    finally:
        for k, v in saved.items():
            setattr(_backend, k, v)
    rows.append(("default run (1000 slots)", tf, ts))

    print(f"backend: {_backend.BACKEND}")
    print(f"{'case':28s} {'compiled':>12s} {'pure':>12s} {'speedup':>8s}")
    for name, tf, ts in rows:
        print(f"{name:28s} {tf * 1e3:10.3f}ms {ts * 1e3:10.3f}ms {ts / tf:7.1f}x")


if __name__ == "__main__":
    main()
