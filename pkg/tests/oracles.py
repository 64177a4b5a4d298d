"""Independent reference computations used only by the tests.

None of these import engine, waterfill or thinflow; they re-derive values
from first principles so frozen constants come from a second source.
"""
from __future__ import annotations

import itertools
from fractions import Fraction


def F(x=0, d=None):
    """Plain Fraction with int parts, whatever rational type comes in."""
    if d is not None:
        return Fraction(int(x), int(d))
    return Fraction(str(x))


def simple_path_lengths(edges, sink):
    """node -> set of tau-lengths of all simple node-to-sink paths (DFS)."""
    out = {}
    for tail, head, tau in edges:
        out.setdefault(tail, []).append((head, F(tau)))
    nodes = {t for t, _, _ in edges} | {h for _, h, _ in edges}
    result = {}
    for v in nodes:
        lengths = set()

        def walk(u, seen, acc):
            if u == sink:
                lengths.add(acc)
                return
            for w, tau in out.get(u, ()):
                if w not in seen:
                    walk(w, seen | {w}, acc + tau)

        walk(v, {v}, F(0))
        result[v] = lengths
    return result


def min_positive_gap(lengths_by_node):
    best = None
    for lengths in lengths_by_node.values():
        for a, b in itertools.combinations(sorted(lengths), 2):
            if b > a and (best is None or b - a < best):
                best = b - a
    return best


def h_value(beta, gamma, alpha, z):
    return beta if z <= gamma else beta + (z - gamma) / alpha


def h_integral(beta, gamma, alpha, z):
    """Closed-form integral of the two-piece marginal cost from 0 to z."""
    z = F(z)
    total = beta * z
    if z > gamma:
        total += (z - gamma) ** 2 / (2 * alpha)
    return total


def grid_minimum(hs, b, resolution=32):
    """Smallest objective over all grid points of the simplex sum z = b.

    ``hs`` is a list of (beta, gamma, alpha).  Grid step is b/resolution.
    """
    k = len(hs)
    best = None
    step = F(b) / resolution
    for combo in itertools.product(range(resolution + 1), repeat=k - 1):
        if sum(combo) > resolution:
            continue
        parts = list(combo) + [resolution - sum(combo)]
        val = sum(h_integral(*h, p * step) for h, p in zip(hs, parts))
        if best is None or val < best:
            best = val
    return best


def fluid_queue(nu, segments, t_end):
    """Queue length samples of a point queue fed by piecewise-constant inflow.

    ``segments`` is a list of (start, end, rate).  Integrates the queue ODE
    piece by piece with explicit depletion times; returns a callable q(t).
    """
    nu = F(nu)
    knots = sorted({F(0), F(t_end)} | {F(a) for a, _, _ in segments} | {F(b) for _, b, _ in segments})
    knots = [t for t in knots if t <= t_end]

    def rate(t):
        return sum((F(r) for a, b, r in segments if F(a) <= t < F(b)), F(0))

    pts = [(F(0), F(0))]
    q = F(0)
    for a, b in zip(knots, knots[1:]):
        r = rate(a)
        if q > 0 or r > nu:
            d = r - nu
            if d < 0 and q + d * (b - a) < 0:
                tz = a + q / (-d)
                pts.append((tz, F(0)))
                q = F(0)
            else:
                q = q + d * (b - a)
        pts.append((b, q))

    def at(t):
        t = F(t)
        prev = pts[0]
        for p in pts[1:]:
            if p[0] >= t:
                if p[0] == prev[0]:
                    return p[1]
                return prev[1] + (p[1] - prev[1]) * (t - prev[0]) / (p[0] - prev[0])
            prev = p
        return pts[-1][1]

    return at
