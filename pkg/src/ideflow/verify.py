"""Independent certification of a flow trace with zero tolerance.

Only the per-commodity edge inflow rates of a trace are taken as given.
Queues follow from them by integrating the point-queue dynamics (a queue
grows by inflow minus capacity and drains at capacity), and outflows follow
from the exit map ``T(t) = t + tau + q(t)/nu``: on every piece where the
inflow is constant and the queue linear, ``T`` is linear, so each commodity
leaves at its entry rate scaled by ``(b - a) / (T(b) - T(a))``.  The stored
queues and outflows are compared against these reconstructions.

Why finitely many probes suffice: all rates are step functions and all
queues piecewise linear, so conservation only needs one interior point per
interval on which every rate is constant.  For the equilibrium condition the
labels are minima of linear path costs and hence only piecewise linear
inside such an interval; they are computed with their right derivative
(shortest paths under lexicographic ``(value, slope)`` costs) and stay linear
until some non-tight edge turns tight, which is a computable root.  On every
label-linear piece an edge is tight throughout iff it is tight with equal
slope at the piece start.
"""
from __future__ import annotations

import heapq
from collections import defaultdict

from .network import Instance
from .numerics import PwlFunction, Rat, StepFunction, pwl_eval, rat, step_eval, step_integrate
from .verdict import CheckCollector, Verdict, Witness

ZERO = Rat(0)

FEASIBILITY_CONDITIONS = (
    "trace_schema",
    "inflow_nonneg",
    "queue_nonneg",
    "queue_matches_inflow",
    "outflow_capacity_fifo",
    "conservation",
    "sink_balance",
)
IDE_CONDITIONS = ("inflow_on_active_edges", "label_pieces_finite")
TERMINATION_CONDITIONS = ("network_empty", "volume_identity", "no_later_inflow")


# ---------------------------------------------------------------------------
# reconstruction


def _edge_inflows(trace) -> dict:
    out: dict = defaultdict(dict)
    for (i, eid), f in trace.inflows.items():
        out[eid][i] = f
    return out


def reconstruct_queue(nu: Rat, rates: dict, horizon: Rat) -> PwlFunction:
    """Queue of an edge under the given commodity inflows, up to ``horizon``."""
    times = {ZERO, horizon}
    for f in rates.values():
        times.update(t for t in f.breakpoints if 0 < t < horizon)
    times = sorted(times)
    pts = []
    q = ZERO
    for a, b in zip(times, times[1:]):
        x = sum((step_eval(f, a) for f in rates.values()), ZERO)
        if q > 0:
            slope = x - nu
            if slope < 0 and q + slope * (b - a) < 0:
                d = a + q / (nu - x)
                pts.append((a, q, slope))
                pts.append((d, ZERO, ZERO))
                q = ZERO
                continue
        else:
            slope = max(x - nu, ZERO)
        pts.append((a, q, slope))
        q = q + slope * (b - a)
    pts.append((horizon, q, pts[-1][2] if pts else ZERO))
    return PwlFunction.from_points(pts)


def reconstruct_outflows(tau: Rat, nu: Rat, rates: dict, queue: PwlFunction,
                         horizon: Rat) -> dict:
    """Per-commodity outflow step functions implied by inflows and queue."""
    times = {ZERO, horizon}
    for f in rates.values():
        times.update(t for t in f.breakpoints if 0 < t < horizon)
    times.update(t for t in queue.breakpoints if 0 < t < horizon)
    times = sorted(times)
    segs: dict = defaultdict(list)
    for a, b in zip(times, times[1:]):
        ta = a + tau + pwl_eval(queue, a) / nu
        tb = b + tau + pwl_eval(queue, b) / nu
        if tb <= ta:
            continue
        stretch = (b - a) / (tb - ta)
        for i, f in rates.items():
            r = step_eval(f, a)
            if r:
                segs[i].append((ta, tb, r * stretch))
    return {i: StepFunction.from_segments(s) for i, s in segs.items()}


class _Reconstruction:
    def __init__(self, inst: Instance, trace):
        self.inst = inst
        self.horizon = rat(trace.horizon)
        self.by_edge = _edge_inflows(trace)
        self.queues = {}
        self.outflows = {}
        for e in inst.edges:
            rates = self.by_edge.get(e.id, {})
            q = reconstruct_queue(e.nu, rates, self.horizon)
            self.queues[e.id] = q
            for i, f in reconstruct_outflows(e.tau, e.nu, rates, q, self.horizon).items():
                self.outflows[(i, e.id)] = f


def _first_step_difference(f: StepFunction, g: StepFunction, until=None):
    pts = sorted(set(f.breakpoints) | set(g.breakpoints) | {ZERO})
    for t in pts:
        if until is not None and t >= until:
            break
        if step_eval(f, t) != step_eval(g, t):
            return t, step_eval(f, t), step_eval(g, t)
    return None


_ZERO_STEP = StepFunction()


# ---------------------------------------------------------------------------
# feasibility


def _check_schema(inst: Instance, trace, col: CheckCollector) -> bool:
    edges = inst.edge_by_id
    comms = inst.commodity_by_id
    ok = True
    for table in (trace.inflows, trace.outflows):
        for (i, eid) in table:
            if i not in comms or eid not in edges:
                col.fail("trace_schema", Witness(i, eid, note="unknown commodity or edge"))
                ok = False
    for eid in trace.queues:
        if eid not in edges:
            col.fail("trace_schema", Witness(None, eid, note="queue for unknown edge"))
            ok = False
    if rat(trace.horizon) < 0:
        col.fail("trace_schema", Witness(note="negative horizon"))
        ok = False
    return ok


def verify_feasible(inst: Instance, trace) -> Verdict:
    col = CheckCollector(FEASIBILITY_CONDITIONS)
    if not _check_schema(inst, trace, col):
        return col.verdict()
    horizon = rat(trace.horizon)
    for (i, eid), f in sorted(trace.inflows.items()):
        for a, b, r in f.segments():
            if r < 0:
                col.fail("inflow_nonneg", Witness(i, eid, a, r, 0, "negative inflow rate"))
                break
        if f.default != 0:
            col.fail("inflow_nonneg", Witness(i, eid, None, f.default, 0, "inflow does not end"))
    if col.failed("inflow_nonneg"):
        return col.verdict()

    rec = _Reconstruction(inst, trace)

    for eid, q in sorted(trace.queues.items()):
        # linear pieces: nonnegative at every breakpoint and at the horizon suffices
        probes = sorted({t for t in q.breakpoints if t <= horizon} | {horizon})
        for t in probes:
            v = pwl_eval(q, t)
            if v < 0:
                col.fail("queue_nonneg", Witness(None, eid, t, v, 0, "stored queue negative"))
                break
    for e in inst.edges:
        stored = trace.queues.get(e.id, PwlFunction())
        mine = rec.queues[e.id]
        pts = sorted({t for t in stored.breakpoints + mine.breakpoints if 0 <= t <= horizon} | {ZERO, horizon})
        for t in pts:
            sv, mv = pwl_eval(stored, t), pwl_eval(mine, t)
            if sv != mv or (t < horizon and stored.slope_at(t) != mine.slope_at(t)):
                col.fail("queue_matches_inflow", Witness(None, e.id, t, sv, mv,
                                                         "stored queue differs from integrated inflow"))
                break

    keys = set(rec.outflows) | set(trace.outflows)
    for key in sorted(keys):
        stored = trace.outflows.get(key, _ZERO_STEP)
        mine = rec.outflows.get(key, _ZERO_STEP)
        diff = _first_step_difference(stored, mine)
        if diff is not None:
            t, sv, mv = diff
            col.fail("outflow_capacity_fifo", Witness(key[0], key[1], t, sv, mv,
                                                      "stored outflow differs from capacity/FIFO outflow"))

    _check_conservation(inst, trace, rec, col)
    return col.verdict()


def _check_conservation(inst: Instance, trace, rec: _Reconstruction, col: CheckCollector) -> None:
    horizon = rec.horizon
    touching: dict = defaultdict(lambda: ([], []))      # (i, v) -> (out fns, in fns)
    edges = inst.edge_by_id
    for (i, eid), f in trace.inflows.items():
        touching[(i, edges[eid].tail)][0].append(f)
    for (i, eid), f in rec.outflows.items():
        touching[(i, edges[eid].head)][1].append(f)
    for c in inst.commodities:
        if c.inflow.breakpoints:
            touching[(c.id, c.source)]
    sinks = {c.id: c.sink for c in inst.commodities}
    sources = {c.id: c for c in inst.commodities}
    for (i, v) in sorted(touching):
        outs, ins = touching[(i, v)]
        c = sources[i]
        u = c.inflow if c.source == v else _ZERO_STEP
        pts = {ZERO, horizon}
        for f in outs + ins + [u]:
            pts.update(t for t in f.breakpoints if 0 < t < horizon)
        pts = sorted(pts)
        for a, b in zip(pts, pts[1:]):
            t = (a + b) / 2
            net = sum((step_eval(f, t) for f in outs), ZERO) - sum((step_eval(f, t) for f in ins), ZERO)
            if v == sinks[i]:
                if net > 0:
                    col.fail("sink_balance", Witness(i, v, t, net, 0, "flow leaves the sink"))
                    break
            elif net != step_eval(u, t):
                col.fail("conservation", Witness(i, v, t, net, step_eval(u, t),
                                                 "outflow minus inflow differs from network inflow"))
                break


# ---------------------------------------------------------------------------
# equilibrium condition


def _lex_labels(inst: Instance, cost: dict, slope: dict, sink: str) -> dict:
    """Shortest distances with their right derivatives: node -> (value, slope)."""
    best = {sink: (ZERO, ZERO)}
    done = set()
    heap = [(ZERO, ZERO, sink)]
    while heap:
        d, s, w = heapq.heappop(heap)
        if w in done:
            continue
        done.add(w)
        for e in inst.in_edges[w]:
            v = e.tail
            if v in done:
                continue
            cand = (d + cost[e.id], s + slope[e.id])
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (cand[0], cand[1], v))
    return best


def verify_ide(inst: Instance, trace, max_pieces: int = 10**4) -> Verdict:
    """Positive inflow of a commodity only on edges that are currently shortest."""
    col = CheckCollector(IDE_CONDITIONS)
    rec = _Reconstruction(inst, trace)
    horizon = rec.horizon
    sink_of = {c.id: c.sink for c in inst.commodities}
    edges = inst.edge_by_id
    pts = {ZERO, horizon}
    for f in trace.inflows.values():
        pts.update(t for t in f.breakpoints if 0 < t < horizon)
    for q in rec.queues.values():
        pts.update(t for t in q.breakpoints if 0 < t < horizon)
    pts = sorted(pts)
    inflow_items = sorted(trace.inflows.items())
    for a, b in zip(pts, pts[1:]):
        used: dict = defaultdict(list)     # sink -> [(commodity, edge)]
        for (i, eid), f in inflow_items:
            if step_eval(f, a) > 0:
                used[sink_of[i]].append((i, eid))
        if not used:
            continue
        qslope = {eid: q.slope_at(a) for eid, q in rec.queues.items()}
        for sink, pairs in sorted(used.items()):
            t = a
            pieces = 0
            while t < b:
                pieces += 1
                if pieces > max_pieces:
                    col.fail("label_pieces_finite", Witness(None, sink, t, pieces, max_pieces,
                                                            "too many label pieces in one interval"))
                    break
                cost = {e.id: e.tau + pwl_eval(rec.queues[e.id], t) / e.nu for e in inst.edges}
                cslope = {e.id: qslope[e.id] / e.nu for e in inst.edges}
                lab = _lex_labels(inst, cost, cslope, sink)
                nxt = b
                for e in inst.edges:
                    if e.tail not in lab or e.head not in lab:
                        continue
                    gap = lab[e.head][0] + cost[e.id] - lab[e.tail][0]
                    rate = lab[e.head][1] + cslope[e.id] - lab[e.tail][1]
                    if gap > 0 and rate < 0:
                        nxt = min(nxt, t + gap / (-rate))
                for i, eid in pairs:
                    e = edges[eid]
                    if e.tail not in lab or e.head not in lab:
                        col.fail("inflow_on_active_edges", Witness(i, eid, t, None, None,
                                                                   "edge cannot reach the sink"))
                        continue
                    lhs = lab[e.tail]
                    rhs = (lab[e.head][0] + cost[eid], lab[e.head][1] + cslope[eid])
                    if lhs != rhs:
                        when = t if lhs[0] != rhs[0] else (t + nxt) / 2
                        val_l = lhs[0] + lhs[1] * (when - t)
                        val_r = rhs[0] + rhs[1] * (when - t)
                        col.fail("inflow_on_active_edges", Witness(i, eid, when, val_l, val_r,
                                                                   "inflow on an edge off the shortest paths"))
                t = nxt
    return col.verdict()


# ---------------------------------------------------------------------------
# termination


def verify_termination(inst: Instance, trace, claimed) -> Verdict:
    """Empty network at ``claimed`` and nothing entering afterwards."""
    col = CheckCollector(TERMINATION_CONDITIONS)
    t_hat = rat(claimed)
    rec = _Reconstruction(inst, trace)
    edges = inst.edge_by_id
    sink_of = {c.id: c.sink for c in inst.commodities}

    def cum(f: StepFunction) -> Rat:
        return pwl_eval(step_integrate(f), t_hat)

    gamma = ZERO
    arrived = ZERO
    for (i, eid), f in trace.inflows.items():
        amount = cum(f)
        gamma += amount
        if edges[eid].tail == sink_of[i]:
            arrived -= amount
    for (i, eid), f in rec.outflows.items():
        amount = cum(f)
        gamma -= amount
        if edges[eid].head == sink_of[i]:
            arrived += amount
    injected = sum((cum(c.inflow) for c in inst.commodities), ZERO)
    if gamma != 0:
        col.fail("network_empty", Witness(None, None, t_hat, gamma, 0, "flow remains in the network"))
    if injected != arrived:
        col.fail("volume_identity", Witness(None, None, t_hat, injected, arrived,
                                            "injected volume differs from arrived volume"))
    for c in inst.commodities:
        if c.inflow.breakpoints and c.inflow.support_end() > t_hat:
            col.fail("no_later_inflow", Witness(c.id, c.source, c.inflow.support_end(), None, None,
                                                "network inflow continues after the claimed time"))
    for (i, eid), f in sorted(trace.inflows.items()):
        if f.breakpoints and f.support_end() > t_hat:
            col.fail("no_later_inflow", Witness(i, eid, f.support_end(), None, None,
                                                "edge inflow after the claimed time"))
            break
    if t_hat > rec.horizon:
        col.fail("no_later_inflow", Witness(None, None, t_hat, t_hat, rec.horizon,
                                            "claimed time lies beyond the trace horizon"))
    return col.verdict()
