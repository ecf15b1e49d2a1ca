#!/usr/bin/env python3
"""Compare the jit kernels with the pure-numpy fallback.

Usage:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--chain-t-end 40]

Each row times the same call on both paths (median of the repeats, after a
warmup that also absorbs compilation) and hashes the outputs: the flag
WRK_DISABLE_NUMBA is supposed to change speed only, never a single byte of
output, and the script exits nonzero if the hashes disagree.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import statistics
import sys
from time import perf_counter

import numpy as np

from wrk._accel import HAS_NUMBA
from wrk.kinetics import convolve
from wrk.microsim import Configuration2State, SimParams, run
from wrk.potential import PairPotential, periodize


def _with_flag(disabled: bool, thunk):
    old = os.environ.get("WRK_DISABLE_NUMBA")
    os.environ["WRK_DISABLE_NUMBA"] = "1" if disabled else "0"
    try:
        return thunk()
    finally:
        if old is None:
            os.environ.pop("WRK_DISABLE_NUMBA", None)
        else:
            os.environ["WRK_DISABLE_NUMBA"] = old


def _time(fn, repeats: int):
    fn()  # warmup, pays jit compilation on the first path
    out = fn()
    samples = []
    for _ in range(repeats):
        t0 = perf_counter()
        fn()
        samples.append(perf_counter() - t0)
    return statistics.median(samples), out


def _digest(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def bench_chain(repeats: int, t_end: float):
    state = Configuration2State(
        1, 40.0,
        np.linspace(0.5, 39.5, 40)[:, None],
        np.linspace(0.25, 39.25, 40)[:, None],
    )
    params = SimParams(m=1.0, z=2.0, phi=PairPotential.top_hat(0.5, 1.0),
                       t_end=t_end, snapshot_dt=t_end / 10.0, seed=123)

    def once():
        log, _ = run(state, params)
        return log

    timings, digests, n_events = {}, {}, 0
    for label, disabled in (("numba", False), ("numpy", True)):
        med, log = _with_flag(disabled, lambda: _time(once, repeats))
        timings[label] = med
        digests[label] = _digest((log.times, log.kinds, log.locs))
        n_events = len(log)
    return (f"simulator chain, {n_events} events", timings, digests)


def bench_conv(repeats: int, dim: int):
    if dim == 1:
        kernel = periodize(PairPotential.top_hat(1.5, 1.0), 64.0, 4096)
        rho = np.random.default_rng(7).uniform(0.0, 2.0, 4096)
        name = "direct convolution d=1 n=4096"
    else:
        kernel = periodize(PairPotential.top_hat(1.2, 1.0, dim=2), 8.0, 64)
        rho = np.random.default_rng(7).uniform(0.0, 2.0, (64, 64))
        name = "direct convolution d=2 n=64"

    def once():
        return convolve(rho, kernel, "direct")

    timings, digests = {}, {}
    for label, disabled in (("numba", False), ("numpy", True)):
        med, out = _with_flag(disabled, lambda: _time(once, repeats))
        timings[label] = med
        digests[label] = _digest((out,))
    return (name, timings, digests)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--chain-t-end", type=float, default=40.0)
    args = ap.parse_args(argv)

    if not HAS_NUMBA:
        print("note: numba is not importable, both columns run the fallback")

    rows = [
        bench_chain(args.repeats, args.chain_t_end),
        bench_conv(args.repeats, 1),
        bench_conv(args.repeats, 2),
    ]

    width = max(len(r[0]) for r in rows) + 2
    print(f"{'kernel':<{width}}{'numba (ms)':>12}{'numpy (ms)':>12}"
          f"{'speedup':>10}  identical")
    ok = True
    for name, timings, digests in rows:
        same = digests["numba"] == digests["numpy"]
        ok = ok and same
        speed = timings["numpy"] / timings["numba"]
        print(f"{name:<{width}}{timings['numba'] * 1e3:>12.3f}"
              f"{timings['numpy'] * 1e3:>12.3f}{speed:>9.1f}x"
              f"  {'yes' if same else 'NO'}")
    if not ok:
        print("error: the two paths disagree", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
