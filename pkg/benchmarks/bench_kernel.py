#!/usr/bin/env python3
"""Compare the compiled and pure-Python tick kernels.

    python3 benchmarks/bench_kernel.py [--duration 30] [--repeat 5] [--csv out.csv]

Times full default scenarios per backend and transport, checks that both
backends produce bitwise-identical traces, and prints mean/sd seconds.
"""

import argparse
import csv
import sys
import time

import numpy as np

from teleop_sim.config import ScenarioConfig
from teleop_sim.kernel import available_backends
from teleop_sim.simulator import run_scenario


def time_run(cfg, backend, repeat):
    out = np.zeros(repeat)
    trace = None
    for i in range(repeat):
        t0 = time.perf_counter()
        trace = run_scenario(cfg, backend=backend)
        out[i] = time.perf_counter() - t0
    return out, trace


def same_trace(a, b):
    return all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("t",) + a.STATE_FIELDS)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--duration", type=float, default=30.0, help="scenario length, s")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--csv", help="write results to this file")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available", file=sys.stderr)

    rows = []
    for kind in ("wired", "wireless", "gallop"):
        cfg = ScenarioConfig(transport=kind, duration_us=int(args.duration * 1e6), seed=args.seed)
        traces = {}
        for b in backends:
            t, traces[b] = time_run(cfg, b, args.repeat)
            rows.append([kind, b, t.mean(), t.std(), t.min(), t.max()])
            print(f"{kind:>9} {b:>7}: {t.mean():.4f} s ({t.std():.4f})")
        if len(traces) == 2:
            ok = same_trace(*traces.values())
            print(f"{kind:>9} identical traces: {ok}")
            if not ok:
                return 1

    if len(backends) == 2:
        by = {(r[0], r[1]): r[2] for r in rows}
        for kind in ("wired", "wireless", "gallop"):
            print(f"{kind:>9} speedup: {by[(kind, 'python')] / by[(kind, 'cython')]:.1f}x")

    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["transport", "backend", "mean_s", "sd_s", "min_s", "max_s"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
