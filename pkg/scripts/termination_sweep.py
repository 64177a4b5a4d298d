"""Simulate seeded random instances and tabulate termination time and certificate time."""
import argparse
import statistics

from ideflow import EngineConfig, simulate
from ideflow.instances import RandomParams, gen_random

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=100)
ap.add_argument("--sinks", type=int, default=1)
ap.add_argument("--acyclic", action="store_true")
ap.add_argument("--nodes", type=int, default=6)
ap.add_argument("--edges", type=int, default=10)
args = ap.parse_args()

params = RandomParams(n=args.nodes, m=args.edges, sinks=args.sinks, acyclic=args.acyclic, commodities=3)
ends, lags, bad = [], [], []
for seed in range(args.seeds):
    rep = simulate(gen_random(seed, params), EngineConfig(10**4, max_phases=10**4))
    cert = rep.termination_certificate
    if rep.outcome.kind != "Terminated" or cert is None:
        bad.append(seed)
        continue
    ends.append(float(rep.outcome.at))
    lags.append(float(rep.outcome.at - cert.time))
print(f"terminated with certificate: {len(ends)}/{args.seeds}; other seeds: {bad}")
if ends:
    print(f"termination time: median {statistics.median(ends):.2f}, max {max(ends):.2f}")
    print(f"drain after certificate: median {statistics.median(lags):.2f}, max {max(lags):.2f}")
