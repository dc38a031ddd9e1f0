"""Compiled kernel vs pure-Python fallback on identical paths.

Usage: python benchmarks/bench_engine.py [--n 100,1000] [--replicas 5]

Both backends consume the same PCG64 stream, so each pair of runs must
produce the same event count; the script checks this before timing.
"""

from __future__ import annotations

import argparse
import statistics
import time

from critical_hawkes.engine import available_backends, simulate_path
from critical_hawkes.params import Homogeneous, ModelConfig, SelfExciting
from critical_hawkes.seeding import derive_seed


def time_backend(cfg, backend, seeds):
    times, events = [], []
    for s in seeds:
        t0 = time.perf_counter()
        rec = simulate_path(cfg, s, backend=backend)
        times.append(time.perf_counter() - t0)
        events.append(rec.n_events)
    return times, events


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="100,1000", help="comma-separated population sizes")
    ap.add_argument("--replicas", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "compiled" not in backends:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
    seeds = [derive_seed(args.seed, r) for r in range(args.replicas)]
    print(f"{'variant':<14} {'N':>7} {'events':>9} {'compiled ms':>12} {'python ms':>11} {'speedup':>8}")
    for agents in (Homogeneous(), SelfExciting(2.0, 0.5, 1.0)):
        for n in (int(x) for x in args.n.split(",")):
            cfg = ModelConfig(n_agents=n, agents=agents)
            tc, ec = time_backend(cfg, "compiled", seeds)
            tp, ep = time_backend(cfg, "python", seeds)
            if ec != ep:
                raise SystemExit(f"backends disagree at N={n}: {ec} vs {ep}")
            mc, mp = statistics.median(tc) * 1e3, statistics.median(tp) * 1e3
            name = type(agents).__name__
            print(f"{name:<14} {n:>7} {statistics.mean(ec):>9.0f} {mc:>12.3f} {mp:>11.1f} {mp / mc:>7.0f}x")


if __name__ == "__main__":
    main()
