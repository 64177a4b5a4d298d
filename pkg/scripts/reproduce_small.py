"""Simulate the two small worked instances and print their phase data."""
import argparse

from ideflow import EngineConfig, builtin, simulate
from ideflow.flowstate import queue_length
from ideflow.verify import verify_feasible, verify_ide


def show(name, horizon, probes):
    rep = simulate(builtin(name), EngineConfig(horizon))
    tr = rep.trace
    print(f"== {name}: {rep.outcome.kind} at {rep.outcome.at}, {len(tr.phase_boundaries())} boundaries")
    print("boundaries:", ", ".join(str(t) for t in tr.phase_boundaries()))
    for edge, t in probes:
        print(f"  q_{edge}({t}) = {queue_length(tr, edge, t)}")
    ok = verify_feasible(tr.instance, tr).passed and verify_ide(tr.instance, tr).passed
    print("  verifier:", "pass" if ok else "FAIL")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.parse_args()
    show("fig2", 3, [("s2t", 2), ("s2t", 3)])
    show("example3", 20, [("st", 1), ("sv", 1), ("wt", 3)])
