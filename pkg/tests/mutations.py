"""Seeded single-segment corruptions of a flow trace."""
from __future__ import annotations

import copy
import random

from ideflow.numerics import PwlFunction, Rat, StepFunction

DELTAS = (Rat(1, 2), Rat(-1, 2), Rat(1), Rat(-1), Rat(3), Rat(1, 7))


def _mutate_step(f: StepFunction, rng: random.Random) -> StepFunction:
    segs = [list(s) for s in f.segments()]
    k = rng.randrange(len(segs))
    if rng.random() < 0.7 or len(segs) < 2:
        segs[k][2] += rng.choice(DELTAS)
    else:
        # move the boundary between segment k and its right neighbour
        k = min(k, len(segs) - 2)
        a, b = segs[k][0], segs[k + 1][1]
        cut = a + (b - a) * Rat(rng.randint(1, 7), 8)
        if cut == segs[k][1]:
            cut = a + (b - a) / 3
        segs[k][1] = segs[k + 1][0] = cut
    return StepFunction.from_segments([tuple(s) for s in segs])


def _mutate_pwl(f: PwlFunction, rng: random.Random) -> PwlFunction:
    pts = f.points()
    k = rng.randrange(len(pts))
    delta = rng.choice(DELTAS)
    out = []
    value = pts[0][1]
    for j, (t, _, s) in enumerate(pts):
        if j > 0:
            t0, _, s0 = out[-1]
            value = out[-1][1] + out[-1][2] * (t - t0)
        out.append((t, value, s + delta if j == k else s))
    return PwlFunction.from_points(out) if out != pts else PwlFunction.from_points(
        [(t, v + 1, s) for t, v, s in pts])


def mutate(trace, seed: int):
    """A deep copy of ``trace`` with one segment of one stored function changed.

    Returns ``(mutant, description)``.
    """
    rng = random.Random(seed)
    mutant = copy.deepcopy(trace)
    mutant.instance = trace.instance
    tables = [("inflow", mutant.inflows), ("outflow", mutant.outflows), ("queue", mutant.queues)]
    kind, table = rng.choice([t for t in tables if t[1]])
    key = rng.choice(sorted(table))
    if kind == "queue":
        table[key] = _mutate_pwl(table[key], rng)
    else:
        table[key] = _mutate_step(table[key], rng)
    return mutant, f"{kind} {key}"
