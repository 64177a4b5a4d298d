"""Run a cycling gadget instance and report Gamma over time plus the detected period."""
import argparse
import time

from ideflow import EngineConfig, builtin, simulate
from ideflow.engine import detect_periodicity
from ideflow.numerics import rat

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--instance", default="nonterm-two-sink",
                choices=("nonterm-two-sink", "nonterm-single-source", "gadget-smoke"))
ap.add_argument("--horizon", default="20")
ap.add_argument("--from", dest="start", default="5")
args = ap.parse_args()

t0 = time.perf_counter()
rep = simulate(builtin(args.instance), EngineConfig(rat(args.horizon)))
print(f"{args.instance}: {rep.outcome.kind} at {rep.outcome.at}, {len(rep.trace.phase_boundaries())} "
      f"phases, {time.perf_counter() - t0:.1f}s")
seen = None
for t, g in rep.gamma:
    if g != seen:
        print(f"  Gamma({t}) = {g}")
        seen = g
print("period:", detect_periodicity(rep.trace, rat(args.start), 5))
