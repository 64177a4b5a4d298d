"""Shortest-path node labels under instantaneous travel times."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from .network import Edge, Instance
from .numerics import INF, Rat


def instantaneous_cost(e: Edge, queue: Rat) -> Rat:
    """Transit time plus the current waiting time ``q / nu``."""
    return e.tau + queue / e.nu


def sink_labels(inst: Instance, queues: dict, sink: str) -> dict:
    """Distances to ``sink``; nodes that cannot reach it are absent.

    Label-setting on reversed edges.  The heap orders by (label, node id) so
    the settling order is reproducible.
    """
    dist = {sink: Rat(0)}
    done = set()
    heap = [(Rat(0), sink)]
    while heap:
        d, w = heapq.heappop(heap)
        if w in done:
            continue
        done.add(w)
        for e in inst.in_edges[w]:
            v = e.tail
            if v in done:
                continue
            nd = d + instantaneous_cost(e, queues.get(e.id, 0))
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def tight_edges(inst: Instance, queues: dict, labels: dict) -> frozenset:
    """Edges ``vw`` with ``l_v = c_e + l_w``."""
    out = []
    for e in inst.edges:
        lw = labels.get(e.head)
        lv = labels.get(e.tail)
        if lw is None or lv is None:
            continue
        if lv == lw + instantaneous_cost(e, queues.get(e.id, 0)):
            out.append(e.id)
    return frozenset(out)


@dataclass(frozen=True)
class LabelSnapshot:
    time: Rat
    labels: dict      # commodity id -> {node: label}; INF for unreachable
    active: dict      # commodity id -> frozenset of edge ids

    def label(self, commodity: str, node: str):
        return self.labels[commodity].get(node, INF)


def compute_labels(inst: Instance, queues: dict, commodity: str, time: Rat = Rat(0)) -> LabelSnapshot:
    """Labels and active edges for one commodity."""
    sink = inst.commodity_by_id[commodity].sink
    lab = sink_labels(inst, queues, sink)
    full = {v: lab.get(v, INF) for v in inst.nodes}
    return LabelSnapshot(time, {commodity: full}, {commodity: tight_edges(inst, queues, lab)})


def snapshot(inst: Instance, queues: dict, time: Rat = Rat(0)) -> LabelSnapshot:
    """Labels for every commodity, computed once per distinct sink."""
    by_sink = {}
    labels = {}
    active = {}
    for c in inst.commodities:
        if c.sink not in by_sink:
            lab = sink_labels(inst, queues, c.sink)
            by_sink[c.sink] = ({v: lab.get(v, INF) for v in inst.nodes}, tight_edges(inst, queues, lab))
        labels[c.id], active[c.id] = by_sink[c.sink]
    return LabelSnapshot(time, labels, active)
