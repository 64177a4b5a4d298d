"""A computed flow over time and the bookkeeping around it.

Inflow rates per commodity and edge are the primary data.  Outflows follow
from them (queue at capacity plus FIFO) and are stored alongside for
convenience, as are the queue lengths.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

from .network import Edge, Instance
from .numerics import PwlFunction, Rat, StepFunction, pwl_eval, rat, rat_str, step_eval, step_integrate

EVENT_ORDER = (
    "QueueDepleted",
    "EdgeActivated",
    "NetworkInflowBreakpoint",
    "NodeInflowBreakpoint",
    "HorizonReached",
    "NetworkEmpty",
)


class InternalError(RuntimeError):
    """A self-check of the bookkeeping failed."""


@dataclass(frozen=True)
class Event:
    kind: str
    edge: Optional[str] = None
    commodity: Optional[str] = None
    node: Optional[str] = None

    def sort_key(self):
        return (EVENT_ORDER.index(self.kind), self.edge or "", self.commodity or "", self.node or "")

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        for k in ("edge", "commodity", "node"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @staticmethod
    def from_json(d: dict) -> "Event":
        return Event(d["kind"], d.get("edge"), d.get("commodity"), d.get("node"))


@dataclass(frozen=True)
class PhaseRecord:
    """One extension phase ``[start, end)``; ``events`` end it, first one primary.

    ``slopes`` lists the nonzero label slopes ``(sink, node, slope)`` used in
    the phase.
    """

    start: Rat
    end: Rat
    events: tuple
    slopes: tuple = ()

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("phase must have positive length")

    @property
    def event(self) -> Event:
        return self.events[0]


@dataclass
class FlowTrace:
    instance: Optional[Instance]
    horizon: Rat
    inflows: dict = field(default_factory=dict)    # (commodity, edge) -> StepFunction
    outflows: dict = field(default_factory=dict)   # (commodity, edge) -> StepFunction
    queues: dict = field(default_factory=dict)     # edge -> PwlFunction
    phases: list = field(default_factory=list)

    def inflow(self, commodity: str, edge: str) -> StepFunction:
        return self.inflows.get((commodity, edge), _ZERO_STEP)

    def outflow(self, commodity: str, edge: str) -> StepFunction:
        return self.outflows.get((commodity, edge), _ZERO_STEP)

    def queue(self, edge: str) -> PwlFunction:
        return self.queues.get(edge, _ZERO_PWL)

    def phase_boundaries(self) -> list:
        if not self.phases:
            return []
        return [p.start for p in self.phases] + [self.phases[-1].end]


_ZERO_STEP = StepFunction()
_ZERO_PWL = PwlFunction()


def queue_length(trace: FlowTrace, edge: str, t) -> Rat:
    return pwl_eval(trace.queue(edge), rat(t))


def exit_time(trace: FlowTrace, edge: str, t) -> Rat:
    """Time at which a particle entering ``edge`` at ``t`` leaves it."""
    e = trace.instance.edge_by_id[edge]
    t = rat(t)
    return t + e.tau + queue_length(trace, edge, t) / e.nu


def derive_outflow(edge: Edge, queue_start: Rat, rates: dict, start: Rat, end: Rat):
    """Outflow caused by constant inflow ``rates`` on ``[start, end)``.

    Returns ``(exit_start, exit_end, out_rates)``.  The aggregate leaves at
    capacity when a queue is present or builds up, otherwise at the inflow
    rate; each commodity keeps its share of the aggregate (FIFO).  A phase
    never outlasts a queue depletion, so one linear piece of the exit time
    covers the whole phase.
    """
    total = sum(rates.values(), Rat(0))
    if queue_start > 0:
        growth = total - edge.nu
    else:
        growth = max(total - edge.nu, Rat(0))
    queue_end = queue_start + (end - start) * growth
    if queue_end < 0:
        raise InternalError(f"queue on {edge.id} would turn negative inside a phase")
    exit_start = start + edge.tau + queue_start / edge.nu
    exit_end = end + edge.tau + queue_end / edge.nu
    return exit_start, exit_end, exit_rates(edge, queue_start, rates)


def exit_rates(edge: Edge, queue: Rat, rates: dict) -> dict:
    """Per-commodity outflow produced by constant inflow ``rates`` entering behind ``queue``."""
    total = sum(rates.values(), Rat(0))
    if total == 0:
        return {}
    factor = edge.nu / total if (queue > 0 or total > edge.nu) else Rat(1)
    return {i: r * factor for i, r in rates.items() if r}


def node_inflow(trace: FlowTrace, commodity: str, node: str, t) -> Rat:
    """Current inflow of a commodity at a node: edge outflows plus network inflow."""
    inst = trace.instance
    t = rat(t)
    total = sum((step_eval(trace.outflow(commodity, e.id), t) for e in inst.in_edges[node]), Rat(0))
    c = inst.commodity_by_id[commodity]
    if c.source == node:
        total += step_eval(c.inflow, t)
    return total


@dataclass(frozen=True)
class Volumes:
    edge_loads: dict
    total: Rat       # flow currently inside the network
    arrived: Rat     # flow that has reached its sink


def volumes(trace: FlowTrace, t) -> Volumes:
    inst = trace.instance
    t = rat(t)
    loads = {e.id: Rat(0) for e in inst.edges}
    arrived = Rat(0)
    sink_of = {c.id: c.sink for c in inst.commodities}
    edges = inst.edge_by_id
    for (i, eid), f in trace.inflows.items():
        loads[eid] += pwl_eval(step_integrate(f), t)
        if edges[eid].tail == sink_of[i]:
            arrived -= pwl_eval(step_integrate(f), t)
    for (i, eid), f in trace.outflows.items():
        amount = pwl_eval(step_integrate(f), t)
        loads[eid] -= amount
        if edges[eid].head == sink_of[i]:
            arrived += amount
    total = sum(loads.values(), Rat(0))
    injected = sum((pwl_eval(step_integrate(c.inflow), t) for c in inst.commodities), Rat(0))
    if total != injected - arrived:
        raise InternalError(f"volume identity broken at {t}: {total} != {injected} - {arrived}")
    return Volumes(loads, total, arrived)


# ---------------------------------------------------------------------------
# serialization


def _step_json(f: StepFunction) -> list:
    return [[rat_str(a), rat_str(b), rat_str(v)] for a, b, v in f.segments()]


def _pwl_json(f: PwlFunction) -> list:
    return [[rat_str(t), rat_str(v), rat_str(s)] for t, v, s in f.points()]


def trace_to_dict(trace: FlowTrace, include_outflows: bool = True) -> dict:
    data = {
        "horizon": rat_str(trace.horizon),
        "phases": [
            {
                "start": rat_str(p.start),
                "end": rat_str(p.end),
                "events": [e.to_json() for e in p.events],
                "slopes": [[s, v, rat_str(a)] for s, v, a in p.slopes],
            }
            for p in trace.phases
        ],
        "inflows": [
            {"commodity": i, "edge": e, "segments": _step_json(f)}
            for (i, e), f in sorted(trace.inflows.items())
        ],
        "queues": [{"edge": e, "points": _pwl_json(f)} for e, f in sorted(trace.queues.items())],
    }
    if include_outflows:
        data["outflows"] = [
            {"commodity": i, "edge": e, "segments": _step_json(f)}
            for (i, e), f in sorted(trace.outflows.items())
        ]
    return data


def save_trace(trace: FlowTrace) -> str:
    return json.dumps(trace_to_dict(trace), separators=(",", ":"), sort_keys=True) + "\n"


def trace_from_dict(data: dict, instance: Optional[Instance] = None) -> FlowTrace:
    try:
        trace = FlowTrace(instance, rat(data["horizon"]))
        for p in data.get("phases", []):
            trace.phases.append(PhaseRecord(
                rat(p["start"]), rat(p["end"]), tuple(Event.from_json(e) for e in p["events"]),
                tuple((s, v, rat(a)) for s, v, a in p.get("slopes", []))))
        for item in data.get("inflows", []):
            trace.inflows[(item["commodity"], item["edge"])] = StepFunction.from_segments(item["segments"])
        for item in data.get("outflows", []):
            trace.outflows[(item["commodity"], item["edge"])] = StepFunction.from_segments(item["segments"])
        for item in data.get("queues", []):
            trace.queues[item["edge"]] = PwlFunction(
                tuple(rat(t) for t, _, _ in item["points"]),
                tuple(rat(v) for _, v, _ in item["points"]),
                tuple(rat(s) for _, _, s in item["points"]))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed trace: {exc}") from exc
    return trace


def load_trace(raw, instance: Optional[Instance] = None) -> FlowTrace:
    if isinstance(raw, (bytes, bytearray)):
        raw = raw.decode("utf-8")
    return trace_from_dict(json.loads(raw), instance)


def trace_to_csv(trace: FlowTrace) -> str:
    """Long format ``time,kind,commodity,edge,value`` sampled at breakpoints.

    Step functions contribute their right value at every breakpoint; queues
    contribute their value at every breakpoint and at the horizon.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "kind", "commodity", "edge", "value"])
    rows = []
    for kind, table in (("inflow", trace.inflows), ("outflow", trace.outflows)):
        for (i, e), f in table.items():
            for t in f.breakpoints:
                rows.append((t, kind, i, e, step_eval(f, t)))
    for e, f in trace.queues.items():
        times = set(f.breakpoints) | {trace.horizon}
        for t in times:
            rows.append((t, "queue", "", e, pwl_eval(f, t)))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    for t, kind, i, e, v in rows:
        w.writerow([rat_str(t), kind, i, e, rat_str(v)])
    return buf.getvalue()
