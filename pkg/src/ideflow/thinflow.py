"""Multi-commodity thin flows: edge rates and label slopes for one phase.

A thin flow ``(x, a)`` at a phase start satisfies

* TF1: the rates leaving ``v`` add up to the current inflow ``b_{i,v}``;
* TF2: no flow on inactive edges;
* TF3: ``a`` vanishes at the commodity's sink;
* TF4: ``a_{i,v}`` is the minimum of ``g_e(X_e)/nu_e + a_{i,w}`` over active ``vw``;
* TF5: that minimum is attained on every edge the commodity uses,

where ``X_e`` is the total rate on ``e`` and ``g_e`` is the queue growth rate.

Commodities with the same sink and active set are interchangeable, so the
solver works on such groups and splits group rates back proportionally to
the commodities' inflows.  Nodes are resolved lazily: a node's split only
needs the label slopes of its successors, which in turn need the splits at
those successors.  One group with a choice at a node is a water-filling
problem; several groups meeting at a node give a small local problem solved
by binary enumeration plus exact linear feasibility.  When the lazy
resolution runs into a dependency cycle between groups, the whole problem is
solved by lexicographic enumeration of the binary structure.
"""
from __future__ import annotations

import itertools
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .lp import find_feasible
from .numerics import Rat
from .verdict import CheckCollector, Verdict, Witness
from .waterfill import build_h, sort_hs, waterfill

ZERO = Rat(0)


class CapExceeded(RuntimeError):
    """The binary structure is too large to enumerate."""


class NoSolution(RuntimeError):
    """No guess yielded a thin flow; existence says this is a bug."""

    def __init__(self, message: str, problem: "ThinFlowProblem"):
        super().__init__(message)
        self.problem = problem


@dataclass(frozen=True)
class TFEdge:
    id: str
    tail: str
    head: str
    nu: Rat
    queue_positive: bool


@dataclass(frozen=True, eq=False)
class ThinFlowProblem:
    """Snapshot data of one phase start.

    ``sinks`` and ``active`` map commodity ids to their sink and active edge
    set; ``demand`` maps ``(commodity, node)`` to the current inflow (missing
    entries are zero).
    """

    nodes: tuple
    edges: tuple
    sinks: dict
    active: dict
    demand: dict

    @property
    def commodities(self) -> list:
        return sorted(self.sinks)

    def edge_map(self) -> dict:
        return {e.id: e for e in self.edges}

    def out_map(self) -> dict:
        out = {v: [] for v in self.nodes}
        for e in sorted(self.edges, key=lambda e: e.id):
            out[e.tail].append(e)
        return out

    def b(self, commodity: str, node: str) -> Rat:
        return self.demand.get((commodity, node), ZERO)


@dataclass
class ThinFlow:
    x: dict = field(default_factory=dict)   # (commodity, edge) -> rate, zeros omitted
    a: dict = field(default_factory=dict)   # (commodity, node) -> slope

    def rate(self, commodity: str, edge: str) -> Rat:
        return self.x.get((commodity, edge), ZERO)


@dataclass(frozen=True)
class BinaryGuess:
    """One assignment of the binary structure.

    ``y[(g, e)] == 1`` forces zero flow of group ``g`` on ``e`` and waives
    tightness; ``z[e] == 1`` means the total stays within capacity on an edge
    without queue; ``m[(g, v)]`` names the edge attaining the minimum at a
    node without inflow.
    """

    y: dict
    z: dict
    m: dict


def g_eval(nu: Rat, total: Rat, queue_positive: bool) -> Rat:
    """Queue growth rate of an edge receiving ``total``."""
    if queue_positive:
        return total - nu
    return max(total - nu, ZERO)


def domain(problem: ThinFlowProblem, commodity: str) -> set:
    """Nodes that reach the commodity's sink along its active edges."""
    return _domain(problem.nodes, problem.edges, problem.active[commodity], problem.sinks[commodity])


def _domain(nodes, edges, active, sink) -> set:
    rev = {}
    for e in edges:
        if e.id in active:
            rev.setdefault(e.head, []).append(e.tail)
    seen = {sink}
    todo = deque([sink])
    while todo:
        w = todo.popleft()
        for v in rev.get(w, ()):
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


# ---------------------------------------------------------------------------
# verification


def check_thinflow(problem: ThinFlowProblem, tf: ThinFlow) -> Verdict:
    """Check TF1 to TF5 exactly; each failing condition carries its first witness."""
    col = CheckCollector(["nonneg", "TF1", "TF2", "TF3", "TF4", "TF5"])
    emap = problem.edge_map()
    out = problem.out_map()
    totals: dict = {}
    for (i, eid), r in sorted(tf.x.items()):
        if r < 0:
            col.fail("nonneg", Witness(i, eid, lhs=r, rhs=ZERO, note="negative rate"))
        if eid not in emap or i not in problem.sinks:
            col.fail("TF2", Witness(i, eid, lhs=r, rhs=ZERO, note="unknown edge or commodity"))
            continue
        totals[eid] = totals.get(eid, ZERO) + r
    slope = {}
    for e in problem.edges:
        slope[e.id] = g_eval(e.nu, totals.get(e.id, ZERO), e.queue_positive) / e.nu
    sent: dict = {}
    for (i, eid), r in tf.x.items():
        if eid in emap and i in problem.sinks:
            key = (i, emap[eid].tail)
            sent[key] = sent.get(key, ZERO) + r
    for (i, v) in sorted(set(sent) | {k for k, b in problem.demand.items() if b}):
        if i not in problem.sinks or v == problem.sinks[i]:
            continue
        got = sent.get((i, v), ZERO)
        if got != problem.b(i, v):
            col.fail("TF1", Witness(i, v, lhs=got, rhs=problem.b(i, v), note="outflow rate vs current inflow"))
    domains: dict = {}
    for i in problem.commodities:
        key = (problem.sinks[i], frozenset(problem.active[i]))
        if key not in domains:
            domains[key] = _domain(problem.nodes, problem.edges, key[1], key[0])
    for (i, eid), r in sorted(tf.x.items()):
        if r == 0 or eid not in emap or i not in problem.sinks:
            continue
        dom = domains[(problem.sinks[i], frozenset(problem.active[i]))]
        if eid not in problem.active[i] or emap[eid].head not in dom:
            col.fail("TF2", Witness(i, eid, lhs=r, rhs=ZERO, note="flow on an inactive edge"))
    for i in problem.commodities:
        act = problem.active[i]
        sink = problem.sinks[i]
        dom = domains[(sink, frozenset(act))]
        a_sink = tf.a.get((i, sink))
        if a_sink != 0:
            col.fail("TF3", Witness(i, sink, lhs=a_sink, rhs=ZERO, note="slope at sink"))
        for v in sorted(dom):
            if v == sink:
                continue
            av = tf.a.get((i, v))
            used = [e for e in out[v] if e.id in act and e.head in dom]
            missing = [e.head for e in used if (i, e.head) not in tf.a]
            if missing:
                col.fail("TF4", Witness(i, v, lhs=av, note=f"no slope at successor {missing[0]}"))
                continue
            cands = [(slope[e.id] + tf.a[(i, e.head)], e) for e in used]
            best = min(c for c, _ in cands)
            if av != best:
                col.fail("TF4", Witness(i, v, lhs=av, rhs=best, note="slope is not the minimum over active edges"))
            for c, e in cands:
                if tf.rate(i, e.id) > 0 and c != av:
                    col.fail("TF5", Witness(i, e.id, lhs=av, rhs=c, note="used edge not tight"))
    return col.verdict()


# ---------------------------------------------------------------------------
# grouped formulation


@dataclass
class _Group:
    key: tuple
    sink: str
    active: frozenset
    members: list
    dom: set
    usable: dict          # node -> list of TFEdge (active, head in domain)
    demand: dict          # node -> total inflow of the members


@dataclass
class GroupedThinFlow:
    """Solution on groups: rates per group and edge, slopes per group and node."""

    groups: list
    group_of: dict                       # commodity -> group index
    rates: list                          # per group: edge -> rate
    slopes: list                         # per group: node -> slope
    totals: dict                         # edge -> total rate

    def commodity_rates(self, problem: ThinFlowProblem) -> dict:
        """Per-commodity edge rates: each member takes its share of the group's node inflow."""
        emap = problem.edge_map()
        by_node: dict = {}
        for (i, v), b in problem.demand.items():
            if b and i in self.group_of:
                by_node.setdefault((self.group_of[i], v), []).append((i, b))
        x = {}
        for gi, grp in enumerate(self.groups):
            for eid, r in self.rates[gi].items():
                if r == 0:
                    continue
                v = emap[eid].tail
                for i, b in by_node.get((gi, v), ()):
                    x[(i, eid)] = r * b / grp.demand[v]
        return x

    def disaggregate(self, problem: ThinFlowProblem) -> ThinFlow:
        a = {}
        for i in problem.commodities:
            for v, s in self.slopes[self.group_of[i]].items():
                a[(i, v)] = s
        return ThinFlow(self.commodity_rates(problem), a)

    def group_view(self, problem: ThinFlowProblem):
        """The solution as a thin flow of a problem with one commodity per group."""
        ids = [f"group{gi}" for gi in range(len(self.groups))]
        sinks = {gid: grp.sink for gid, grp in zip(ids, self.groups)}
        active = {gid: grp.active for gid, grp in zip(ids, self.groups)}
        demand = {(gid, v): b for gid, grp in zip(ids, self.groups) for v, b in grp.demand.items() if b}
        x = {(gid, e): r for gid, rates in zip(ids, self.rates) for e, r in rates.items() if r}
        a = {(gid, v): s for gid, slopes in zip(ids, self.slopes) for v, s in slopes.items()}
        return ThinFlowProblem(problem.nodes, problem.edges, sinks, active, demand), ThinFlow(x, a)


def _make_groups(problem: ThinFlowProblem):
    out = problem.out_map()
    by_key: dict = {}
    groups: list = []
    group_of = {}
    for i in problem.commodities:
        sink = problem.sinks[i]
        act = frozenset(problem.active[i])
        key = (sink, act)
        if key not in by_key:
            dom = _domain(problem.nodes, problem.edges, act, sink)
            usable = {v: [e for e in out[v] if e.id in act and e.head in dom] for v in dom if v != sink}
            by_key[key] = len(groups)
            groups.append(_Group(key, sink, act, [], dom, usable, {}))
        gi = by_key[key]
        groups[gi].members.append(i)
        group_of[i] = gi
    for (i, v), r in problem.demand.items():
        if r < 0:
            raise ValueError(f"negative inflow for {i} at {v}")
        if r == 0 or i not in group_of:
            continue
        grp = groups[group_of[i]]
        if v == grp.sink:
            continue
        if v not in grp.dom or not grp.usable.get(v):
            raise ValueError(f"commodity {i} has inflow at {v} but cannot reach its sink over active edges")
        grp.demand[v] = grp.demand.get(v, ZERO) + r
    return groups, group_of


class _Cycle(Exception):
    pass


class _Lazy:
    """Resolve node splits on demand; raises ``_Cycle`` on circular dependence."""

    def __init__(self, problem: ThinFlowProblem, groups: list):
        self.p = problem
        self.groups = groups
        self.out = problem.out_map()
        self.rates = [dict() for _ in groups]
        self.totals: dict = {}
        self.decided: set = set()
        self.busy: set = set()
        self.labels = [dict() for _ in groups]
        self.deciders: dict = {}
        for gi, g in enumerate(groups):
            for v, r in g.demand.items():
                if r > 0:
                    self.deciders.setdefault(v, []).append(gi)
        # edges whose total depends on a decision at their tail
        self.loaded = set()
        for v, gis in self.deciders.items():
            for gi in gis:
                for e in groups[gi].usable[v]:
                    self.loaded.add(e.id)

    def total(self, e: TFEdge) -> Rat:
        if e.id not in self.loaded:
            return ZERO
        self.decide(e.tail)
        return self.totals.get(e.id, ZERO)

    def slope(self, gi: int, v: str) -> Rat:
        lab = self.labels[gi]
        if v in lab:
            return lab[v]
        grp = self.groups[gi]
        if v == grp.sink:
            lab[v] = ZERO
            return ZERO
        # iterative deepening keeps the Python stack shallow on long paths
        stack = [v]
        while stack:
            u = stack[-1]
            if u in lab:
                stack.pop()
                continue
            pending = [e.head for e in grp.usable[u] if e.head not in lab and e.head != grp.sink]
            if pending:
                stack.extend(pending)
                continue
            best = None
            for e in grp.usable[u]:
                w_slope = ZERO if e.head == grp.sink else lab[e.head]
                c = g_eval(e.nu, self.total(e), e.queue_positive) / e.nu + w_slope
                if best is None or c < best:
                    best = c
            lab[u] = best
            stack.pop()
        return lab[v]

    def decide(self, v: str) -> None:
        if v in self.decided:
            return
        if v in self.busy:
            raise _Cycle(v)
        self.busy.add(v)
        gis = self.deciders.get(v, [])
        offsets: dict = {}
        free = []
        for gi in gis:
            grp = self.groups[gi]
            edges = grp.usable[v]
            if len(edges) == 1:
                e = edges[0]
                b = grp.demand[v]
                self.rates[gi][e.id] = b
                offsets[e.id] = offsets.get(e.id, ZERO) + b
            else:
                free.append(gi)
        if len(free) == 1:
            gi = free[0]
            grp = self.groups[gi]
            hs = []
            for e in grp.usable[v]:
                aw = self.slope(gi, e.head)
                hs.append(build_h(e.id, e.nu, aw, Rat(1) if e.queue_positive else ZERO,
                                  offsets.get(e.id, ZERO)))
            split = waterfill(grp.demand[v], sort_hs(hs))
            for eid, r in split.rates.items():
                if r:
                    self.rates[gi][eid] = r
                    offsets[eid] = offsets.get(eid, ZERO) + r
        elif free:
            self._local(v, free, offsets)
        for eid, r in offsets.items():
            self.totals[eid] = r
        self.busy.discard(v)
        self.decided.add(v)

    def _local(self, v: str, free: list, offsets: dict) -> None:
        succ = {}
        for gi in free:
            for e in self.groups[gi].usable[v]:
                succ[(gi, e.id)] = self.slope(gi, e.head)
        edges = {}
        for gi in free:
            for e in self.groups[gi].usable[v]:
                edges[e.id] = e
        sol = _solve_node(v, free, self.groups, edges, succ, offsets)
        if sol is None:
            raise NoSolution(f"local split at node {v} has no solution", self.p)
        for (gi, eid), r in sol.items():
            if r:
                self.rates[gi][eid] = self.rates[gi].get(eid, ZERO) + r
                offsets[eid] = offsets.get(eid, ZERO) + r


def _solve_node(v, free, groups, edges, succ, offsets):
    """Joint split of several groups at one node by enumeration plus LP."""
    xvars = []
    for gi in free:
        for e in groups[gi].usable[v]:
            xvars.append((gi, e.id))
    n_x = len(xvars)
    a_idx = {gi: n_x + k for k, gi in enumerate(free)}
    nvars = n_x + len(free)
    on_edge: dict = {}
    for k, (gi, eid) in enumerate(xvars):
        on_edge.setdefault(eid, []).append(k)
    zchoices = []
    for eid in sorted(on_edge):
        e = edges[eid]
        if e.queue_positive:
            continue
        lo = offsets.get(eid, ZERO)
        hi = lo + sum(groups[gi].demand[v] for gi, _ in (xvars[k] for k in on_edge[eid]))
        if lo < e.nu < hi:
            zchoices.append(eid)

    def growth(eid, zval):
        """Coefficients and constant of g_e/nu as a linear expression in x."""
        e = edges[eid]
        if not e.queue_positive:
            below = zval[eid] == 1 if eid in zval else offsets.get(eid, ZERO) < e.nu
            if below:
                return {}, ZERO
        return {k: 1 / e.nu for k in on_edge[eid]}, (offsets.get(eid, ZERO) - e.nu) / e.nu

    ychoices = [k for k in range(n_x)]
    for ybits in itertools.product((0, 1), repeat=len(ychoices)):
        yval = dict(zip(ychoices, ybits))
        # every group needs one usable edge
        ok = True
        for gi in free:
            if all(yval[k] == 1 for k, (g2, _) in enumerate(xvars) if g2 == gi):
                ok = False
                break
        if not ok:
            continue
        for zbits in itertools.product((1, 0), repeat=len(zchoices)):
            zval = dict(zip(zchoices, zbits))
            eq = []
            le = []
            for gi in free:
                eq.append(({k: 1 for k, (g2, _) in enumerate(xvars) if g2 == gi}, groups[gi].demand[v]))
            for k in range(n_x):
                if yval[k] == 1:
                    eq.append(({k: 1}, ZERO))
            for eid, zv in zval.items():
                e = edges[eid]
                row = {k: 1 for k in on_edge[eid]}
                rhs = e.nu - offsets.get(eid, ZERO)
                if zv == 1:
                    le.append((row, rhs))
                else:
                    le.append(({k: -1 for k in on_edge[eid]}, -rhs))
            for k, (gi, eid) in enumerate(xvars):
                coefs, const = growth(eid, zval)
                # a_g - growth <= const + succ
                row = {a_idx[gi]: Rat(1)}
                for j, c in coefs.items():
                    row[j] = row.get(j, ZERO) - c
                rhs = const + succ[(gi, eid)]
                if yval[k] == 0:
                    eq.append((row, rhs))
                else:
                    le.append((row, rhs))
            point = find_feasible(nvars, eq, le, free=list(a_idx.values()))
            if point is not None:
                return {xvars[k]: point[k] for k in range(n_x)}
    return None


def _lazy_solve(problem, groups):
    lazy = _Lazy(problem, groups)
    for v in sorted(lazy.deciders):
        lazy.decide(v)
    slopes = []
    for gi, grp in enumerate(groups):
        for v in sorted(grp.dom):
            lazy.slope(gi, v)
        slopes.append(dict(lazy.labels[gi]))
    return lazy.rates, slopes, lazy.totals


# ---------------------------------------------------------------------------
# global enumeration


def _enumerate_solve(problem, groups, cap: int, workers: int):
    xvars = []
    for gi, grp in enumerate(groups):
        for v in sorted(grp.demand):
            if grp.demand[v] > 0:
                for e in grp.usable[v]:
                    xvars.append((gi, e.id))
    xindex = {xv: k for k, xv in enumerate(xvars)}
    n_x = len(xvars)
    avars = []
    for gi, grp in enumerate(groups):
        for v in sorted(grp.dom):
            avars.append((gi, v))
    aindex = {av: n_x + k for k, av in enumerate(avars)}
    nvars = n_x + len(avars)
    emap = problem.edge_map()
    on_edge: dict = {}
    for k, (gi, eid) in enumerate(xvars):
        on_edge.setdefault(eid, []).append(k)

    # binary structure
    ybin = []
    for gi, grp in enumerate(groups):
        for v in sorted(grp.demand):
            if grp.demand[v] > 0 and len(grp.usable[v]) > 1:
                for e in grp.usable[v]:
                    ybin.append((gi, e.id))
    zbin = []
    zfixed = {}
    for eid in sorted(on_edge):
        e = emap[eid]
        if e.queue_positive:
            continue
        hi = sum(groups[gi].demand[e.tail] for gi, _ in (xvars[k] for k in on_edge[eid]))
        if hi <= e.nu:
            zfixed[eid] = 1
        else:
            zbin.append(eid)
    mbin = []
    for gi, grp in enumerate(groups):
        for v in sorted(grp.dom):
            if v == grp.sink or grp.demand.get(v, ZERO) > 0:
                continue
            if len(grp.usable[v]) > 1:
                mbin.append((gi, v))
    bits = len(ybin) + len(zbin) + sum((len(groups[gi].usable[v]) - 1).bit_length() for gi, v in mbin)
    if bits > cap:
        raise CapExceeded(f"{bits} binary decisions exceed the cap of {cap}")

    def build(guess: BinaryGuess):
        eq = []
        le = []
        for gi, grp in enumerate(groups):
            eq.append(({aindex[(gi, grp.sink)]: 1}, ZERO))
            for v in sorted(grp.demand):
                if grp.demand[v] > 0:
                    eq.append(({xindex[(gi, e.id)]: 1 for e in grp.usable[v]}, grp.demand[v]))
        for (gi, eid), yv in guess.y.items():
            if yv == 1:
                eq.append(({xindex[(gi, eid)]: 1}, ZERO))
        for eid, zv in guess.z.items():
            e = emap[eid]
            row = {k: 1 for k in on_edge[eid]}
            if zv == 1:
                le.append((row, e.nu))
            else:
                le.append(({k: -1 for k in on_edge[eid]}, -e.nu))
        for gi, grp in enumerate(groups):
            for v in sorted(grp.dom):
                if v == grp.sink:
                    continue
                tight_edges = set()
                if grp.demand.get(v, ZERO) > 0:
                    for e in grp.usable[v]:
                        if len(grp.usable[v]) == 1 or guess.y[(gi, e.id)] == 0:
                            tight_edges.add(e.id)
                elif len(grp.usable[v]) == 1:
                    tight_edges.add(grp.usable[v][0].id)
                else:
                    tight_edges.add(guess.m[(gi, v)])
                for e in grp.usable[v]:
                    row = {aindex[(gi, v)]: Rat(1), aindex[(gi, e.head)]: Rat(-1)}
                    const = ZERO
                    zero_growth = (not e.queue_positive) and (e.id not in on_edge or guess.z.get(e.id, zfixed.get(e.id)) == 1)
                    if not zero_growth:
                        for k in on_edge.get(e.id, ()):
                            row[k] = row.get(k, ZERO) - 1 / e.nu
                        const = Rat(-1)
                    if e.id in tight_edges:
                        eq.append((row, const))
                    else:
                        le.append((row, const))
        return eq, le

    choice_lists = [(0, 1)] * len(ybin) + [(1, 0)] * len(zbin)
    choice_lists += [tuple(e.id for e in groups[gi].usable[v]) for gi, v in mbin]

    def guesses():
        for combo in itertools.product(*choice_lists):
            y = dict(zip(ybin, combo[:len(ybin)]))
            bad = False
            for gi, grp in enumerate(groups):
                for v in grp.demand:
                    if grp.demand[v] > 0 and len(grp.usable[v]) > 1:
                        if all(y[(gi, e.id)] == 1 for e in grp.usable[v]):
                            bad = True
            if bad:
                continue
            z = dict(zip(zbin, combo[len(ybin):len(ybin) + len(zbin)]))
            m = dict(zip(mbin, combo[len(ybin) + len(zbin):]))
            yield BinaryGuess(y, z, m)

    def attempt(guess):
        eq, le = build(guess)
        return find_feasible(nvars, eq, le, free=range(n_x, nvars))

    point = None
    if workers <= 1:
        for g in guesses():
            point = attempt(g)
            if point is not None:
                break
    else:
        # evaluate in ordered batches; the first success in guess order wins
        it = guesses()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            while point is None:
                batch = list(itertools.islice(it, workers * 4))
                if not batch:
                    break
                for res in pool.map(attempt, batch):
                    if res is not None:
                        point = res
                        break
    if point is None:
        raise NoSolution("no binary guess admits a thin flow", problem)
    rates = [dict() for _ in groups]
    totals: dict = {}
    for k, (gi, eid) in enumerate(xvars):
        if point[k]:
            rates[gi][eid] = point[k]
            totals[eid] = totals.get(eid, ZERO) + point[k]
    slopes = [dict() for _ in groups]
    for (gi, v), k in aindex.items():
        slopes[gi][v] = point[k]
    return rates, slopes, totals


def default_workers() -> int:
    raw = os.environ.get("IDE_FLOW_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def solve_grouped(problem: ThinFlowProblem, cap: int = 24, method: str = "auto",
                  workers: Optional[int] = None) -> GroupedThinFlow:
    """Thin flow on commodity groups.

    ``method`` is ``"auto"`` (lazy resolution, enumeration on cycles) or
    ``"enumerate"`` (always the lexicographic guess search).
    """
    if method not in ("auto", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    groups, group_of = _make_groups(problem)
    workers = default_workers() if workers is None else workers
    result = None
    if method == "auto":
        try:
            result = _lazy_solve(problem, groups)
        except _Cycle:
            result = None
    if result is None:
        result = _enumerate_solve(problem, groups, cap, workers)
    rates, slopes, totals = result
    return GroupedThinFlow(groups, group_of, rates, slopes, totals)


def solve_thinflow(problem: ThinFlowProblem, cap: int = 24, method: str = "auto",
                   workers: Optional[int] = None) -> ThinFlow:
    """A thin flow satisfying TF1 to TF5, deterministic for equal input."""
    tf = solve_grouped(problem, cap, method, workers).disaggregate(problem)
    verdict = check_thinflow(problem, tf)
    if not verdict.passed:
        raise NoSolution(f"solver output fails {verdict.failures()[0].condition}", problem)
    return tf


def waterfill_thinflow(problem: ThinFlowProblem) -> ThinFlow:
    """Per-node water-filling for problems whose commodities share sink and active set.

    Nodes are handled from the sink outward in reverse topological order of
    the active edges, so every successor slope is known when a node is split.
    """
    ids = problem.commodities
    if not ids:
        return ThinFlow()
    sink = problem.sinks[ids[0]]
    act = problem.active[ids[0]]
    for i in ids:
        if problem.sinks[i] != sink or frozenset(problem.active[i]) != frozenset(act):
            raise ValueError("water-filling needs one sink and one active set")
    dom = domain(problem, ids[0])
    out = problem.out_map()
    usable = {v: [e for e in out[v] if e.id in act and e.head in dom] for v in dom}
    # reverse topological order: Kahn on the usable subgraph
    pending = {v: len(usable[v]) for v in dom}
    preds: dict = {}
    for v in dom:
        for e in usable[v]:
            preds.setdefault(e.head, []).append(v)
    ready = sorted(v for v in dom if pending[v] == 0)
    order = []
    while ready:
        w = ready.pop(0)
        order.append(w)
        for v in sorted(preds.get(w, ())):
            pending[v] -= 1
            if pending[v] == 0:
                ready.append(v)
        ready.sort()
    slope = {}
    x = {}
    for v in order:
        if v == sink:
            slope[v] = ZERO
            continue
        total = sum((problem.b(i, v) for i in ids), ZERO)
        hs = [build_h(e.id, e.nu, slope[e.head], Rat(1) if e.queue_positive else ZERO) for e in usable[v]]
        split = waterfill(total, sort_hs(hs))
        slope[v] = split.level
        for eid, r in split.rates.items():
            if r:
                for i in ids:
                    bi = problem.b(i, v)
                    if bi:
                        x[(i, eid)] = r * bi / total
    a = {(i, v): s for i in ids for v, s in slope.items()}
    return ThinFlow(x, a)
