"""Built-in instances and seeded random families."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .network import Commodity, Edge, Instance, instance_from_dict, instance_to_dict
from .numerics import Rat, StepFunction, rat


class ParamError(ValueError):
    pass


class _Builder:
    """Collects nodes, edges and commodities in insertion order."""

    def __init__(self):
        self.nodes: list = []
        self._known: set = set()
        self.edges: list = []
        self.commodities: list = []

    def node(self, v: str) -> str:
        if v not in self._known:
            self._known.add(v)
            self.nodes.append(v)
        return v

    def edge(self, tail: str, head: str, tau=1, nu=1, eid: str = None) -> str:
        self.node(tail)
        self.node(head)
        eid = eid or f"{tail}->{head}"
        self.edges.append(Edge(eid, tail, head, rat(tau), rat(nu)))
        return eid

    def commodity(self, cid: str, source: str, sink: str, pieces) -> None:
        self.commodities.append(Commodity(cid, source, sink, StepFunction.from_segments(pieces)))

    def build(self) -> Instance:
        inst = Instance(tuple(self.nodes), tuple(self.edges), tuple(self.commodities))
        # round trip through the validating parser
        return instance_from_dict(instance_to_dict(inst))


def gen_fig2() -> Instance:
    """Two commodities, one sink; commodity 1 cycles through s1, v, s2."""
    b = _Builder()
    b.edge("s1", "v", 1, 2, "s1v")
    b.edge("s1", "t", 3, 1, "s1t")
    b.edge("v", "s2", 1, 2, "vs2")
    b.edge("s2", "t", 1, 1, "s2t")
    b.edge("s2", "s1", 1, 1, "s2s1")
    b.commodity("1", "s1", "t", [(0, 1, 3)])
    b.commodity("2", "s2", "t", [(1, 2, 4)])
    return b.build()


def gen_example3() -> Instance:
    b = _Builder()
    for v in ("s", "v", "w", "t"):
        b.node(v)
    b.edge("s", "v", 1, 7, "sv")
    b.edge("s", "t", 3, 1, "st")
    b.edge("v", "w", 1, 7, "vw")
    b.edge("w", "t", 1, 1, "wt")
    b.edge("w", "s", 1, 6, "ws")
    b.commodity("1", "s", "t", [(0, 1, 16)])
    return b.build()


def gen_nonuniqueness() -> Instance:
    """Two equally long paths; several equilibria exist."""
    b = _Builder()
    for v in ("s", "v", "w", "t"):
        b.node(v)
    b.edge("s", "v", 1, 2, "sv")
    b.edge("v", "t", 1, 2, "vt")
    b.edge("s", "w", 1, 2, "sw")
    b.edge("w", "t", 1, 1, "wt")
    b.commodity("1", "s", "t", [(0, 1, 2)])
    return b.build()


# ---------------------------------------------------------------------------
# cycling construction
#
# Every gadget A is a pair of unit cycles through the shared edge v1v2 with
# its own commodity.  Gadgets are stacked in series along v1 -> v2 into
# columns B2, B5 and B7, each of vertical length 45.  Two copies C0 and C1
# hold one column of every type and shift; a gadget's exits v2, v5 and v7
# lead through a collector into the matching column of the other copy, whose
# top feeds the gadget's sink.  All exits thus reach the sink over exactly
# HOOK_LENGTH unit edges.  The figures leave the connector wiring open; this
# reconstruction fixes it so that only the common exit length matters.

COLUMN_LENGTH = 45
HOOK_LENGTH = 48            # exit edge + collector edge + column + top edge
COLUMN_TYPES = (2, 5, 7)
_COLUMN_LAYOUT = {
    2: ((0, 4), (1, 4), (2, 4)),
    5: ((3, 3), (4, 3)),
    7: ((3, 3), (4, 3), (5, 2), (6, 1)),
}
GADGET_EDGES = (("v1", "v2"), ("v2", "v3"), ("v3", "v4"), ("v4", "v5"), ("v5", "v1"),
                ("v2", "v6"), ("v6", "v7"), ("v7", "v1"))
SINKS = ("t", "t'")


@dataclass(frozen=True)
class GadgetSpec:
    """One gadget A: its shift and the node ids its three exits attach to."""

    name: str
    shift: int
    copy: int
    hooks: tuple          # collector ids for the exits at v2, v5, v7

    @property
    def release(self) -> int:
        return self.shift % 5

    def node(self, k: int) -> str:
        return f"{self.name}.v{k}"


def _column(b: _Builder, copy: int, j: int, s: int, specs: list) -> tuple:
    """Add column B_j^{+s} of one copy; returns (bottom, top) node ids."""
    prefix = f"C{copy}.B{j}+{s}"
    m = 0
    prev_top = None
    bottom = None
    for k, count in _COLUMN_LAYOUT[j]:
        for _ in range(count):
            m += 1
            name = f"{prefix}.A{m}"
            shift = k + s
            spec = GadgetSpec(name, shift, copy,
                              tuple(f"C{copy}.P{jj}+{shift % 5}" for jj in COLUMN_TYPES))
            for u, v in GADGET_EDGES:
                b.edge(spec.node(int(u[1])), spec.node(int(v[1])))
            if prev_top is None:
                bottom = spec.node(1)
            else:
                c1, c2 = f"{name}.c1", f"{name}.c2"
                b.edge(prev_top, c1)
                b.edge(c1, c2)
                b.edge(c2, spec.node(1))
            prev_top = spec.node(2)
            specs.append(spec)
    used = m + 3 * (m - 1)
    for p in range(COLUMN_LENGTH - used):
        nxt = f"{prefix}.pad{p + 1}"
        b.edge(prev_top, nxt)
        prev_top = nxt
    return bottom, prev_top


def _cycling_core(b: _Builder) -> list:
    specs: list = []
    ends = {}
    for copy in (0, 1):
        for j in COLUMN_TYPES:
            for s in range(5):
                ends[(copy, j, s)] = _column(b, copy, j, s, specs)
    for copy in (0, 1):
        other = 1 - copy
        for j in COLUMN_TYPES:
            for s in range(5):
                bottom, top = ends[(other, j, s)]
                b.edge(f"C{copy}.P{j}+{s}", bottom)
        # columns of C1 lead to t, those of C0 to t'
        for j in COLUMN_TYPES:
            for s in range(5):
                b.edge(ends[(copy, j, s)][1], SINKS[1 - copy])
    for spec in specs:
        for v, hook in zip((2, 5, 7), spec.hooks):
            b.edge(spec.node(v), hook)
    return specs


def _sink_of(spec: GadgetSpec) -> str:
    return SINKS[spec.copy]


def gen_gadget_graph(kind: str = "TwoSink") -> Instance:
    """The cycling instance with 270 gadget commodities, or its single-source form.

    ``TwoSink``: each gadget's commodity injects rate 2 at its v1 during
    ``[shift mod 5, shift mod 5 + 1)``.  ``SingleSource``: a super source
    releases two commodities during ``[0, 1)`` whose flow reaches each former
    gadget source at rate 2 during ``[5, 6)``, after a delay edge of length
    ``shift mod 5`` (merged away when that length would be 0).
    """
    if kind not in ("TwoSink", "SingleSource"):
        raise ParamError(f"unknown gadget kind {kind!r}")
    b = _Builder()
    for t in SINKS:
        b.node(t)
    specs = _cycling_core(b)
    if kind == "TwoSink":
        for spec in specs:
            r = spec.release
            b.commodity(spec.name, spec.node(1), _sink_of(spec), [(r, r + 1, 2)])
        return b.build()
    totals = {t: Rat(0) for t in SINKS}
    for spec in specs:
        r = spec.release
        entry = spec.node(1)
        if r > 0:
            entry = f"{spec.name}.src"
            b.edge(entry, spec.node(1), r, 2)
        path_len = r + 1 + HOOK_LENGTH
        v, w = f"{spec.name}.hv", f"{spec.name}.hw"
        b.edge("S", v, 1, 6)
        b.edge(v, w, 1, 3)
        b.edge("S", w, 2, path_len - 1)
        b.edge(w, entry, 2, 2)
        b.edge(w, _sink_of(spec), 1, 1)
        totals[_sink_of(spec)] += path_len + 5
    b.commodity("0", "S", SINKS[0], [(0, 1, totals[SINKS[0]])])
    b.commodity("0'", "S", SINKS[1], [(0, 1, totals[SINKS[1]])])
    return b.build()


def gen_gadget_smoke() -> Instance:
    """One gadget A whose exits reach the sink over plain paths of length 48.

    The exit paths carry no other traffic, so their cost stays frozen and the
    gadget shows only its first pattern steps, not a repeating cycle.
    """
    b = _Builder()
    for u, v in GADGET_EDGES:
        b.edge(f"A.{u}", f"A.{v}")
    for k in (2, 5, 7):
        prev = f"A.v{k}"
        for p in range(1, HOOK_LENGTH):
            nxt = f"P{k}.{p}"
            b.edge(prev, nxt)
            prev = nxt
        b.edge(prev, "t")
    b.commodity("A", "A.v1", "t", [(0, 1, 2)])
    return b.build()


# ---------------------------------------------------------------------------
# random families

QUARTERS = tuple(Rat(k, 4) for k in range(1, 17))


@dataclass(frozen=True)
class RandomParams:
    n: int = 6
    m: int = 10
    sinks: int = 1
    acyclic: bool = False
    commodities: int = 2

    def validate(self) -> None:
        if self.n < 2:
            raise ParamError("need at least two nodes")
        if not 1 <= self.sinks < self.n:
            raise ParamError("sinks must be between 1 and n-1")
        if self.m < self.n - 1:
            raise ParamError("m must be at least n-1 for the connecting backbone")
        if self.commodities < 1:
            raise ParamError("need at least one commodity")
        if self.acyclic and self.m > self.n * (self.n - 1) // 2 * 3:
            raise ParamError("too many edges for an acyclic instance")


def gen_random(seed: int, params: RandomParams = RandomParams()) -> Instance:
    """Seeded random instance; nodes ``n0..``, the last ``sinks`` nodes are sinks.

    A backbone ``n0 -> n1 -> ...`` makes every later node reachable from every
    earlier one.  Acyclic instances only add edges from lower to higher index.
    """
    params.validate()
    rng = random.Random(seed)
    n = params.n
    names = [f"n{k}" for k in range(n)]
    b = _Builder()
    for v in names:
        b.node(v)
    pairs = [(k, k + 1) for k in range(n - 1)]
    while len(pairs) < params.m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u == v:
            continue
        if params.acyclic and u > v:
            u, v = v, u
        pairs.append((u, v))
    for idx, (u, v) in enumerate(pairs):
        b.edge(names[u], names[v], rng.choice(QUARTERS), rng.choice(QUARTERS), f"e{idx}")
    sink_idx = list(range(n - params.sinks, n))
    for c in range(params.commodities):
        t = rng.choice(sink_idx)
        s = rng.randrange(0, min(t, n - params.sinks))
        start = Rat(rng.randrange(0, 5), 2)
        pieces = []
        for _ in range(rng.randint(1, 2)):
            end = start + Rat(rng.randint(1, 4), 2)
            pieces.append((start, end, Rat(rng.randint(1, 8), 2)))
            start = end
        b.commodity(f"c{c}", names[s], names[t], pieces)
    return b.build()


def gen_random_thinflow_problem(seed: int, max_commodities: int = 3, max_edges: int = 8,
                                single_sink: bool = False):
    """Random phase-start snapshot: graph, queues, label-tight active sets, inflows."""
    from .labels import sink_labels, tight_edges
    from .thinflow import TFEdge, ThinFlowProblem

    rng = random.Random(seed)
    n = rng.randint(3, 5)
    m = rng.randint(n - 1, max(n - 1, max_edges))
    nodes = tuple(f"n{k}" for k in range(n))
    pairs = [(k, k + 1) for k in range(n - 1)]
    while len(pairs) < m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            pairs.append((u, v))
    edges = []
    queues = {}
    for idx, (u, v) in enumerate(pairs):
        e = Edge(f"e{idx}", nodes[u], nodes[v], Rat(rng.randint(1, 4)), Rat(rng.randint(1, 4)))
        edges.append(e)
        queues[e.id] = Rat(rng.choice((0, 0, 1, 2, 3)))
    inst = Instance(nodes, tuple(edges), ())
    sink_pool = [nodes[-1]] if single_sink else [nodes[-1], nodes[-2]]
    k = rng.randint(1, max_commodities)
    sinks, active, demand = {}, {}, {}
    for c in range(k):
        cid = f"c{c}"
        t = rng.choice(sink_pool)
        lab = sink_labels(inst, queues, t)
        sinks[cid] = t
        active[cid] = tight_edges(inst, queues, lab)
        for v in lab:
            if v != t and rng.random() < 0.6:
                demand[(cid, v)] = Rat(rng.randint(0, 8), rng.choice((1, 2, 4)))
    tf_edges = tuple(TFEdge(e.id, e.tail, e.head, e.nu, queues[e.id] > 0) for e in edges)
    return ThinFlowProblem(nodes, tf_edges, sinks, active, {k: v for k, v in demand.items() if v})


BUILTINS = {
    "fig2": gen_fig2,
    "example3": gen_example3,
    "nonuniqueness": gen_nonuniqueness,
    "nonterm-two-sink": lambda: gen_gadget_graph("TwoSink"),
    "nonterm-single-source": lambda: gen_gadget_graph("SingleSource"),
    "gadget-smoke": gen_gadget_smoke,
}


def builtin(name: str) -> Instance:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ParamError(f"unknown instance {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
