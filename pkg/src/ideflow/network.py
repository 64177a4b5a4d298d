"""Instances: a directed multigraph with transit times and capacities, plus
commodities with right-constant inflow rates.  Includes the JSON format and
the two graph constants that drive the termination certificate."""
from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .numerics import INF, Rat, StepFunction, rat, rat_gcd, rat_str


class ParseError(ValueError):
    """Malformed instance data."""


class ValidationError(ValueError):
    """Well-formed data that violates a model requirement."""


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    tau: Rat
    nu: Rat


@dataclass(frozen=True)
class Commodity:
    id: str
    source: str
    sink: str
    inflow: StepFunction


@dataclass(frozen=True, eq=True)
class Instance:
    nodes: tuple
    edges: tuple
    commodities: tuple = field(default=())

    @cached_property
    def edge_by_id(self) -> dict:
        return {e.id: e for e in self.edges}

    @cached_property
    def commodity_by_id(self) -> dict:
        return {c.id: c for c in self.commodities}

    @cached_property
    def out_edges(self) -> dict:
        out = {v: [] for v in self.nodes}
        for e in self.edges:
            out[e.tail].append(e)
        return {v: tuple(sorted(es, key=lambda e: e.id)) for v, es in out.items()}

    @cached_property
    def in_edges(self) -> dict:
        inc = {v: [] for v in self.nodes}
        for e in self.edges:
            inc[e.head].append(e)
        return {v: tuple(sorted(es, key=lambda e: e.id)) for v, es in inc.items()}

    @cached_property
    def sinks(self) -> tuple:
        return tuple(sorted({c.sink for c in self.commodities}))

    @property
    def common_sink(self) -> Optional[str]:
        s = self.sinks
        return s[0] if len(s) == 1 else None

    @cached_property
    def inflow_end(self) -> Rat:
        """Time after which no commodity injects flow any more."""
        return max((c.inflow.support_end() for c in self.commodities), default=Rat(0))

    def __hash__(self):
        return hash((self.nodes, self.edges))


def _check_id(x, what: str) -> str:
    if not isinstance(x, str) or not x:
        raise ParseError(f"{what} must be a nonempty string, got {x!r}")
    return x


def _read_rat(x, what: str) -> Rat:
    if isinstance(x, float):
        raise ParseError(f"{what}: floats are not accepted, write rationals as \"p/q\" strings")
    try:
        return rat(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"{what}: cannot read {x!r} as a rational") from exc


def instance_from_dict(data) -> Instance:
    if not isinstance(data, dict):
        raise ParseError("instance must be a JSON object")
    for key in ("nodes", "edges", "commodities"):
        if key not in data or not isinstance(data[key], list):
            raise ParseError(f"missing list field {key!r}")
    nodes = tuple(_check_id(v, "node id") for v in data["nodes"])
    if len(set(nodes)) != len(nodes):
        raise ValidationError("duplicate node id")
    known = set(nodes)
    edges = []
    for raw in data["edges"]:
        if not isinstance(raw, dict):
            raise ParseError("edge entries must be objects")
        try:
            eid = _check_id(raw["id"], "edge id")
            tail = _check_id(raw["tail"], f"edge {eid} tail")
            head = _check_id(raw["head"], f"edge {eid} head")
            tau = _read_rat(raw["tau"], f"edge {eid} tau")
            nu = _read_rat(raw["nu"], f"edge {eid} nu")
        except KeyError as exc:
            raise ParseError(f"edge entry lacks field {exc.args[0]!r}") from exc
        if tail not in known or head not in known:
            raise ValidationError(f"edge {eid} references an unknown node")
        if tau <= 0:
            raise ValidationError(f"edge {eid}: transit time must be positive, got {tau}")
        if nu <= 0:
            raise ValidationError(f"edge {eid}: capacity must be positive, got {nu}")
        edges.append(Edge(eid, tail, head, tau, nu))
    if len({e.id for e in edges}) != len(edges):
        raise ValidationError("duplicate edge id")
    commodities = []
    for raw in data["commodities"]:
        if not isinstance(raw, dict):
            raise ParseError("commodity entries must be objects")
        try:
            cid = _check_id(raw["id"], "commodity id")
            src = _check_id(raw["source"], f"commodity {cid} source")
            snk = _check_id(raw["sink"], f"commodity {cid} sink")
            pieces = raw["inflow"]
        except KeyError as exc:
            raise ParseError(f"commodity entry lacks field {exc.args[0]!r}") from exc
        if src not in known or snk not in known:
            raise ValidationError(f"commodity {cid} references an unknown node")
        if not isinstance(pieces, list):
            raise ParseError(f"commodity {cid}: inflow must be a list")
        segs = []
        for p in pieces:
            try:
                a = _read_rat(p["from"], f"commodity {cid} inflow start")
                b = _read_rat(p["to"], f"commodity {cid} inflow end")
                r = _read_rat(p["rate"], f"commodity {cid} inflow rate")
            except (KeyError, TypeError) as exc:
                raise ParseError(f"commodity {cid}: inflow pieces need from/to/rate") from exc
            if r < 0:
                raise ValidationError(f"commodity {cid}: negative inflow rate {r}")
            if a < 0 or b < a:
                raise ValidationError(f"commodity {cid}: bad inflow interval [{a},{b})")
            segs.append((a, b, r))
        try:
            u = StepFunction.from_segments(segs)
        except ValueError as exc:
            raise ValidationError(f"commodity {cid}: {exc}") from exc
        commodities.append(Commodity(cid, src, snk, u))
    if len({c.id for c in commodities}) != len(commodities):
        raise ValidationError("duplicate commodity id")
    inst = Instance(nodes, tuple(edges), tuple(commodities))
    for c in commodities:
        if c.sink not in reachable_from(inst, c.source):
            raise ValidationError(f"commodity {c.id}: sink {c.sink} unreachable from source {c.source}")
    return inst


def load_instance(raw) -> Instance:
    """Parse and validate instance JSON given as bytes or str."""
    if isinstance(raw, (bytes, bytearray)):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("instance is not UTF-8") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(data)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "nodes": list(inst.nodes),
        "edges": [
            {"id": e.id, "tail": e.tail, "head": e.head, "tau": rat_str(e.tau), "nu": rat_str(e.nu)}
            for e in inst.edges
        ],
        "commodities": [
            {
                "id": c.id,
                "source": c.source,
                "sink": c.sink,
                "inflow": [
                    {"from": rat_str(a), "to": rat_str(b), "rate": rat_str(r)}
                    for a, b, r in c.inflow.segments()
                ],
            }
            for c in inst.commodities
        ],
    }


def save_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def reachable_from(inst: Instance, v: str) -> set:
    seen = {v}
    todo = deque([v])
    while todo:
        u = todo.popleft()
        for e in inst.out_edges[u]:
            if e.head not in seen:
                seen.add(e.head)
                todo.append(e.head)
    return seen


def nu_min(inst: Instance) -> Rat:
    return min(e.nu for e in inst.edges)


def tau_distances(inst: Instance, sink: str) -> dict:
    """Shortest transit-time distance from every node that reaches ``sink``."""
    dist = {sink: Rat(0)}
    heap = [(Rat(0), sink)]
    while heap:
        d, w = heapq.heappop(heap)
        if d > dist[w]:
            continue
        for e in inst.in_edges[w]:
            nd = d + e.tau
            if e.tail not in dist or nd < dist[e.tail]:
                dist[e.tail] = nd
                heapq.heappush(heap, (nd, e.tail))
    return dist


@dataclass(frozen=True)
class TauDelta:
    """Smallest positive length gap between two paths from one node to the sink.

    ``value`` is ``INF`` when no node has two paths of different length and
    ``None`` when the path enumeration hit its cap.  ``witness`` holds
    ``(node, shorter_path, longer_path)`` as edge-id tuples.
    """

    value: object
    witness: Optional[tuple] = None


def _shortest_path_edges(inst: Instance, dist: dict, v: str, sink: str) -> tuple:
    path = []
    while v != sink:
        e = min((e for e in inst.out_edges[v] if e.head in dist and dist[e.head] + e.tau == dist[v]),
                key=lambda e: e.id)
        path.append(e.id)
        v = e.head
    return tuple(path)


def tau_delta_bounds(inst: Instance, sink: str):
    """Cheap bracket ``(lower, upper, witness)`` around the exact gap.

    Every path length is an integer multiple of the gcd of all transit times,
    so that gcd is a lower bound.  Leaving a node over an edge towards a
    closer node that is not on a shortest path, then continuing along a
    shortest path, gives a concrete gap and hence an upper bound (``INF`` if
    no such edge exists).
    """
    dist = tau_distances(inst, sink)
    lower = rat_gcd(e.tau for e in inst.edges)
    best = INF
    witness = None
    for v in sorted(dist):
        if v == sink:
            continue
        for e in inst.out_edges[v]:
            if e.head in dist and dist[e.head] < dist[v]:
                gap = e.tau + dist[e.head] - dist[v]
                if 0 < gap < best:
                    best = gap
                    longer = (e.id,) + _shortest_path_edges(inst, dist, e.head, sink)
                    witness = (v, _shortest_path_edges(inst, dist, v, sink), longer)
    return lower, best, witness


def tau_delta_search(inst: Instance, sink: str, path_cap: int = 10**6) -> TauDelta:
    """Exact minimal positive gap between simple-path lengths to ``sink``.

    When the bracket of :func:`tau_delta_bounds` is tight the answer is
    known.  Otherwise the simple paths from each node are enumerated; more
    than ``path_cap`` search steps give up with value ``None``.
    """
    lower, best, witness = tau_delta_bounds(inst, sink)
    if best != INF and best == lower:
        return TauDelta(best, witness)
    dist = tau_distances(inst, sink)
    steps = 0
    for v in sorted(dist):
        if v == sink:
            continue
        lengths: dict = {}
        stack = [(v, Rat(0), (), frozenset([v]))]
        while stack:
            steps += 1
            if steps > path_cap:
                return TauDelta(None)
            u, length, path, seen = stack.pop()
            if u == sink:
                lengths.setdefault(length, path)
                continue
            for e in reversed(inst.out_edges[u]):
                if e.head in dist and e.head not in seen:
                    stack.append((e.head, length + e.tau, path + (e.id,), seen | {e.head}))
        ordered = sorted(lengths)
        for a, b in zip(ordered, ordered[1:]):
            if b - a < best:
                best = b - a
                witness = (v, lengths[a], lengths[b])
        if best == lower:
            break
    return TauDelta(best, witness)


def tau_delta(inst: Instance, sink: str, path_cap: int = 10**6):
    """Value of :func:`tau_delta_search`: a Rat, ``INF`` or ``None``."""
    return tau_delta_search(inst, sink, path_cap).value
