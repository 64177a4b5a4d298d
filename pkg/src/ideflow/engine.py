"""Phase-by-phase construction of an instantaneous dynamic equilibrium.

Each phase starts from the exact state at ``theta``: queues, labels, active
edges and current node inflows.  A split of the node inflows is chosen (by
water-filling for a common sink, by a thin flow otherwise), and the phase is
extended as long as nothing the split depends on changes.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .flowstate import Event, FlowTrace, InternalError, PhaseRecord, derive_outflow, exit_rates
from .labels import sink_labels, tight_edges
from .network import Instance, nu_min, tau_delta, tau_delta_bounds
from .numerics import INF, PwlFunction, Rat, StepFunction, is_inf, pwl_eval, rat, step_eval, step_integrate
from .thinflow import TFEdge, ThinFlow, ThinFlowProblem, check_thinflow, g_eval, solve_grouped
from .waterfill import build_h, sort_hs, waterfill

ZERO = Rat(0)
MODES = ("auto", "waterfill", "thinflow")


@dataclass(frozen=True)
class EngineConfig:
    horizon: Rat
    max_phases: int = 10**5
    mode: str = "auto"
    binary_cap: int = 24
    workers: Optional[int] = None
    debug_checks: bool = False
    tau_delta_path_cap: int = 10**6

    def __post_init__(self):
        object.__setattr__(self, "horizon", rat(self.horizon))
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.max_phases < 1:
            raise ValueError("max_phases must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class Outcome:
    kind: str                     # "Terminated", "HorizonReached" or "PhaseCapReached"
    at: Optional[Rat] = None


@dataclass(frozen=True)
class Certificate:
    time: Rat
    volume: Rat
    bound: object                 # tau_delta * nu_min, possibly INF


@dataclass
class SimulationReport:
    trace: FlowTrace
    outcome: Outcome
    termination_certificate: Optional[Certificate] = None
    periodicity: Optional[tuple] = None
    gamma: list = field(default_factory=list)   # (theta_k, Gamma(theta_k)) at phase starts


@dataclass(frozen=True)
class PhasePlan:
    """Everything decided at a phase start."""

    rates: dict          # (commodity, edge) -> inflow rate
    totals: dict         # edge -> aggregated rate
    labels: dict         # sink -> {node: label}
    active: dict         # sink -> frozenset of edge ids
    slopes: dict         # sink -> {node: slope}


def _append(segs: list, a: Rat, b: Rat, r: Rat) -> None:
    if a >= b or r == 0:
        return
    if segs and segs[-1][1] == a and segs[-1][2] == r:
        segs[-1][1] = b
    else:
        segs.append([a, b, r])


class _State:
    def __init__(self, inst: Instance):
        self.inst = inst
        self.theta = ZERO
        self.q = {e.id: ZERO for e in inst.edges}
        self.qpts = {e.id: [(ZERO, ZERO, ZERO)] for e in inst.edges}
        self.in_segs: dict = defaultdict(list)
        self.out_segs: dict = defaultdict(list)
        self.ptr: dict = defaultdict(int)
        self.cum_out: dict = defaultdict(Rat)
        self.into: dict = defaultdict(set)       # node -> keys with recorded outflow
        self.f_plus = {e.id: ZERO for e in inst.edges}
        self.cum_inflow = {c.id: step_integrate(c.inflow) for c in inst.commodities}
        self.sink_of = {c.id: c.sink for c in inst.commodities}

    # -- current values -------------------------------------------------

    def frontier(self, eid: str) -> Rat:
        e = self.inst.edge_by_id[eid]
        return self.theta + e.tau + self.q[eid] / e.nu

    def out_rate(self, key, t: Rat) -> Rat:
        """Recorded outflow rate of ``key`` at ``t >= theta``."""
        segs = self.out_segs.get(key)
        if not segs:
            return ZERO
        for k in range(self.ptr[key], len(segs)):
            a, b, r = segs[k]
            if b <= t:
                continue
            return r if a <= t else ZERO
        return ZERO

    def node_demand(self) -> dict:
        """Current inflow ``(commodity, node) -> rate``, zeros and own sinks dropped."""
        b: dict = defaultdict(Rat)
        for c in self.inst.commodities:
            u = step_eval(c.inflow, self.theta)
            if u and c.source != c.sink:
                b[(c.id, c.source)] += u
        for v, keys in self.into.items():
            for key in keys:
                i = key[0]
                if self.sink_of[i] == v:
                    continue
                r = self.out_rate(key, self.theta)
                if r:
                    b[(i, v)] += r
        return {k: v for k, v in b.items() if v}

    def arrived(self) -> Rat:
        z = ZERO
        for v, keys in self.into.items():
            for key in keys:
                if self.sink_of[key[0]] == v:
                    z += self.cum_out[key]
        return z

    def gamma(self) -> Rat:
        total = sum(self.f_plus.values(), ZERO) - sum(self.cum_out.values(), ZERO)
        injected = sum((pwl_eval(f, self.theta) for f in self.cum_inflow.values()), ZERO)
        if total != injected - self.arrived():
            raise InternalError(f"volume identity broken at {self.theta}")
        return total

    # -- advancing ------------------------------------------------------

    def advance(self, plan: PhasePlan, alpha: Rat) -> None:
        inst = self.inst
        start, end = self.theta, self.theta + alpha
        per_edge: dict = defaultdict(dict)
        for (i, eid), r in plan.rates.items():
            per_edge[eid][i] = r
            _append(self.in_segs[(i, eid)], start, end, r)
        for e in inst.edges:
            rates = per_edge.get(e.id, {})
            q0 = self.q[e.id]
            t0, t1, out = derive_outflow(e, q0, rates, start, end)
            for i, r in out.items():
                key = (i, e.id)
                _append(self.out_segs[key], t0, t1, r)
                self.into[e.head].add(key)
            total = plan.totals.get(e.id, ZERO)
            slope = g_eval(e.nu, total, q0 > 0)
            pts = self.qpts[e.id]
            if slope != pts[-1][2]:
                if pts[-1][0] == start:
                    pts.pop()
                if not pts or pts[-1][2] != slope:
                    pts.append((start, q0, slope))
            self.q[e.id] = q0 + alpha * slope
            if self.q[e.id] < 0:
                raise InternalError(f"negative queue on {e.id}")
            self.f_plus[e.id] += total * alpha
        for key, segs in self.out_segs.items():
            k = self.ptr[key]
            acc = ZERO
            while k < len(segs) and segs[k][1] <= end:
                a, b, r = segs[k]
                if b > start:
                    acc += (b - max(a, start)) * r
                k += 1
            if k < len(segs) and segs[k][0] < end:
                a, _, r = segs[k]
                acc += (end - max(a, start)) * r
            self.ptr[key] = k
            self.cum_out[key] += acc
        self.theta = end

    def to_trace(self, horizon: Rat, phases: list) -> FlowTrace:
        trace = FlowTrace(self.inst, horizon, phases=phases)
        for key, segs in sorted(self.in_segs.items()):
            if segs:
                trace.inflows[key] = StepFunction.from_segments(segs)
        for key, segs in sorted(self.out_segs.items()):
            if segs:
                trace.outflows[key] = StepFunction.from_segments(segs)
        for eid, pts in sorted(self.qpts.items()):
            if any(s for _, _, s in pts):
                trace.queues[eid] = PwlFunction.from_points(pts)
        return trace


def _sink_groups(inst: Instance) -> dict:
    """sink -> sorted commodity ids."""
    out: dict = defaultdict(list)
    for c in inst.commodities:
        out[c.sink].append(c.id)
    return {s: sorted(ids) for s, ids in sorted(out.items())}


def _plan_waterfill(st: _State, sink: str, labels: dict, active: frozenset, demand: dict) -> PhasePlan:
    inst = st.inst
    by_node: dict = defaultdict(dict)
    for (i, v), r in demand.items():
        by_node[v][i] = r
    slope = {sink: ZERO}
    rates: dict = {}
    totals: dict = defaultdict(Rat)
    for v in sorted(labels, key=lambda v: (labels[v], v)):
        if v == sink:
            continue
        hs = [build_h(e.id, e.nu, slope[e.head], st.q[e.id])
              for e in inst.out_edges[v] if e.id in active]
        shares = by_node.get(v, {})
        total = sum(shares.values(), ZERO)
        split = waterfill(total, sort_hs(hs))
        slope[v] = split.level
        for eid, z in split.rates.items():
            if not z:
                continue
            totals[eid] += z
            for i, share in shares.items():
                rates[(i, eid)] = z * share / total
    return PhasePlan(rates, dict(totals), {sink: labels}, {sink: active}, {sink: slope})


def _problem(st: _State, groups: dict, active: dict, demand: dict) -> ThinFlowProblem:
    inst = st.inst
    edges = tuple(TFEdge(e.id, e.tail, e.head, e.nu, st.q[e.id] > 0) for e in inst.edges)
    sinks = {c.id: c.sink for c in inst.commodities}
    act = {c.id: active[c.sink] for c in inst.commodities}
    return ThinFlowProblem(tuple(inst.nodes), edges, sinks, act, dict(demand))


def _plan_thinflow(st: _State, cfg: EngineConfig, groups: dict, labels: dict, active: dict,
                   demand: dict) -> PhasePlan:
    problem = _problem(st, groups, active, demand)
    sol = solve_grouped(problem, cfg.binary_cap, "auto", cfg.workers)
    # members of a group share slopes and split proportionally, so checking
    # the group-level thin flow covers every member
    verdict = check_thinflow(*sol.group_view(problem))
    if not verdict.passed:
        raise InternalError(f"thin flow fails {verdict.failures()[0].condition}")
    slopes = {}
    for gi, grp in enumerate(sol.groups):
        slopes[grp.sink] = dict(sol.slopes[gi])
    totals = {e: r for e, r in sol.totals.items() if r}
    return PhasePlan(sol.commodity_rates(problem), totals, labels, active, slopes)


def _cross_check(st: _State, plan: PhasePlan, groups: dict, demand: dict) -> None:
    problem = _problem(st, groups, plan.active, demand)
    a = {}
    for sink, ids in groups.items():
        for i in ids:
            for v, s in plan.slopes[sink].items():
                a[(i, v)] = s
    verdict = check_thinflow(problem, ThinFlow(dict(plan.rates), a))
    if not verdict.passed:
        raise InternalError(f"water-fill split fails thin-flow check {verdict.failures()[0].condition}")


def plan_phase(st: _State, cfg: EngineConfig, groups: dict) -> PhasePlan:
    inst = st.inst
    labels = {s: sink_labels(inst, st.q, s) for s in groups}
    active = {s: tight_edges(inst, st.q, labels[s]) for s in groups}
    demand = st.node_demand()
    mode = cfg.mode
    if mode == "auto":
        mode = "waterfill" if len(groups) == 1 else "thinflow"
    if mode == "waterfill":
        if len(groups) != 1:
            raise ValueError("water-fill mode needs a common sink")
        (sink,) = groups
        plan = _plan_waterfill(st, sink, labels[sink], active[sink], demand)
        if cfg.debug_checks:
            _cross_check(st, plan, groups, demand)
        return plan
    return _plan_thinflow(st, cfg, groups, labels, active, demand)


def max_feasible_alpha(st: _State, plan: PhasePlan, groups: dict, limit: Rat):
    """Largest phase length and the events ending it.

    ``limit`` is the latest admissible end (the horizon).  Returns
    ``(alpha, events)`` with events sorted by kind order, then ids.
    """
    inst = st.inst
    theta = st.theta
    best = limit
    events: list = [Event("HorizonReached")]

    def offer(t: Rat, ev: Event) -> None:
        nonlocal best, events
        if t < best:
            best, events = t, [ev]
        elif t == best:
            events.append(ev)

    # queues running empty
    for e in inst.edges:
        q = st.q[e.id]
        x = plan.totals.get(e.id, ZERO)
        if q > 0 and x < e.nu:
            offer(theta + q / (e.nu - x), Event("QueueDepleted", edge=e.id))

    # inactive edges turning tight
    for sink, ids in groups.items():
        lab = plan.labels[sink]
        act = plan.active[sink]
        a = plan.slopes[sink]
        for e in inst.edges:
            if e.id in act or e.tail not in lab or e.head not in lab or e.tail == sink:
                continue
            slack = lab[e.head] + e.tau + st.q[e.id] / e.nu - lab[e.tail]
            growth = g_eval(e.nu, plan.totals.get(e.id, ZERO), st.q[e.id] > 0) / e.nu + a[e.head] - a[e.tail]
            if growth < 0:
                offer(theta + slack / (-growth), Event("EdgeActivated", edge=e.id, commodity=ids[0]))

    # node inflow changes: recorded outflow pieces, the piece this phase
    # starts feeding at the exit frontier, and network inflow breakpoints
    tentative: dict = {}
    per_edge: dict = defaultdict(dict)
    for (i, eid), r in plan.rates.items():
        per_edge[eid][i] = r
    for e in inst.edges:
        tentative[e.id] = (st.frontier(e.id), exit_rates(e, st.q[e.id], per_edge.get(e.id, {})))

    keys_into: dict = defaultdict(set)
    for v, keys in st.into.items():
        keys_into[v] |= keys
    for eid, (_, out) in tentative.items():
        for i in out:
            keys_into[inst.edge_by_id[eid].head].add((i, eid))
    sources: dict = defaultdict(list)
    for c in inst.commodities:
        if c.source != c.sink:
            sources[c.source].append(c)

    def edge_part(key, t):
        eid = key[1]
        t0, out = tentative[eid]
        if t >= t0:
            return out.get(key[0], ZERO)
        return st.out_rate(key, t)

    for v in sorted(set(keys_into) | set(sources)):
        keys = sorted(k for k in keys_into.get(v, ()) if st.sink_of[k[0]] != v)
        srcs = sources.get(v, [])
        if not keys and not srcs:
            continue
        times = set()
        for key in keys:
            segs = st.out_segs.get(key, [])
            for k in range(st.ptr[key], len(segs)):
                a, b, _ = segs[k]
                if a > best:
                    break
                times.add(a)
                times.add(b)
            times.add(tentative[key[1]][0])
        for c in srcs:
            times.update(c.inflow.breakpoints)
        times = sorted(t for t in times if theta < t <= best)
        if not times:
            continue
        commodities = sorted({k[0] for k in keys} | {c.id for c in srcs})
        now_edge = {i: sum((edge_part(k, theta) for k in keys if k[0] == i), ZERO) for i in commodities}
        now_src = {c.id: step_eval(c.inflow, theta) for c in srcs}
        for t in times:
            found = []
            for i in commodities:
                ep = sum((edge_part(k, t) for k in keys if k[0] == i), ZERO)
                sp = ZERO
                src_changed = False
                if i in now_src:
                    c = inst.commodity_by_id[i]
                    sp = step_eval(c.inflow, t)
                    src_changed = sp != now_src[i]
                if ep + sp == now_edge[i] + now_src.get(i, ZERO):
                    continue
                if src_changed:
                    found.append(Event("NetworkInflowBreakpoint", commodity=i))
                if ep != now_edge[i]:
                    found.append(Event("NodeInflowBreakpoint", node=v))
            if found:
                for ev in dict.fromkeys(found):
                    offer(t, ev)
                break

    # nothing enters any edge and inflows are over: the last particles in
    # transit reach their sinks when the final recorded outflow piece ends
    if theta >= inst.inflow_end and not any(plan.totals.values()):
        last = max((segs[-1][1] for segs in st.out_segs.values() if segs), default=theta)
        if last > theta:
            offer(last, Event("NetworkEmpty"))

    alpha = best - theta
    if alpha <= 0:
        raise InternalError(f"non-positive phase length at {theta}")
    return alpha, sorted(dict.fromkeys(events), key=Event.sort_key)


def termination_bound(inst: Instance, path_cap: int = 10**6):
    """``tau_delta * nu_min`` minimized over sinks; ``None`` if unavailable."""
    values = []
    for s in inst.sinks:
        td = tau_delta(inst, s, path_cap)
        if td is None:
            return None
        values.append(td)
    if not values:
        return None
    td = min(values)
    return INF if td == INF else td * nu_min(inst)


def termination_certificate(theta: Rat, gamma: Rat, inflow_end: Rat, bound):
    """Certificate when inflows are over and the volume is below the bound.

    An infinite bound (no node with two path lengths) certifies any state.
    """
    if bound is None or theta < inflow_end:
        return None
    if gamma < bound:
        return Certificate(theta, gamma, bound)
    return None


class _LazyBound:
    """Termination bound computed only when the cheap bracket cannot decide.

    ``tau_delta`` of every sink lies between the gcd of the transit times and
    a shortcut upper bound; a volume at or above the upper end rules out a
    certificate without enumerating paths.
    """

    def __init__(self, inst: Instance, path_cap: int):
        self.inst = inst
        self.path_cap = path_cap
        self.upper = None
        self.exact = "unset"

    def certificate(self, theta: Rat, gamma: Rat):
        inst = self.inst
        if self.upper is None:
            uppers = [tau_delta_bounds(inst, s)[1] for s in inst.sinks]
            self.upper = min(uppers) if uppers else INF
        if not is_inf(self.upper) and gamma >= self.upper * nu_min(inst):
            return None
        if self.exact == "unset":
            self.exact = termination_bound(inst, self.path_cap)
        return termination_certificate(theta, gamma, inst.inflow_end, self.exact)


def simulate(inst: Instance, cfg: EngineConfig) -> SimulationReport:
    st = _State(inst)
    groups = _sink_groups(inst)
    phases: list = []
    gammas: list = []
    inflow_end = inst.inflow_end
    bounds = _LazyBound(inst, cfg.tau_delta_path_cap)
    cert = None
    outcome = None
    while True:
        gamma = st.gamma()
        gammas.append((st.theta, gamma))
        if st.theta >= inflow_end:
            if cert is None:
                cert = bounds.certificate(st.theta, gamma)
            if gamma == 0:
                if phases and phases[-1].events[-1].kind != "NetworkEmpty":
                    last = phases[-1]
                    phases[-1] = PhaseRecord(last.start, last.end, last.events + (Event("NetworkEmpty"),),
                                             last.slopes)
                outcome = Outcome("Terminated", st.theta)
                break
        if st.theta >= cfg.horizon:
            outcome = Outcome("HorizonReached", st.theta)
            break
        if len(phases) >= cfg.max_phases:
            outcome = Outcome("PhaseCapReached", st.theta)
            break
        plan = plan_phase(st, cfg, groups)
        alpha, events = max_feasible_alpha(st, plan, groups, cfg.horizon)
        slopes = tuple((s, v, a) for s in sorted(plan.slopes) for v, a in sorted(plan.slopes[s].items()) if a)
        phases.append(PhaseRecord(st.theta, st.theta + alpha, tuple(events), slopes))
        if cfg.debug_checks:
            _check_label_linearity(st, plan, alpha, groups)
        st.advance(plan, alpha)
    trace = st.to_trace(st.theta, phases)
    return SimulationReport(trace, outcome, cert, None, gammas)


def _check_label_linearity(st: _State, plan: PhasePlan, alpha: Rat, groups: dict) -> None:
    half = alpha / 2
    q_mid = {}
    for e in st.inst.edges:
        x = plan.totals.get(e.id, ZERO)
        q_mid[e.id] = st.q[e.id] + half * g_eval(e.nu, x, st.q[e.id] > 0)
    for sink in groups:
        mid = sink_labels(st.inst, q_mid, sink)
        for v, lab in plan.labels[sink].items():
            expect = lab + half * plan.slopes[sink].get(v, ZERO)
            if mid.get(v) != expect:
                raise InternalError(f"label of {v} not linear in phase at {st.theta}")


def detect_periodicity(trace: FlowTrace, theta_from, max_period):
    """Smallest ``p <= max_period`` with the state repeating on ``[t0, t0+p]``.

    The state is the set of queue functions and per-commodity edge inflow
    rates.  Candidate periods are distances between breakpoints after
    ``theta_from``; a trace without breakpoints there has no period.
    """
    t0 = rat(theta_from)
    max_period = rat(max_period)
    funcs_step = list(trace.inflows.values())
    funcs_pwl = list(trace.queues.values())
    bps = set()
    for f in funcs_step:
        bps.update(b for b in f.breakpoints if b >= t0)
    for f in funcs_pwl:
        bps.update(b for b in f.breakpoints if b >= t0)
    bps = sorted(bps)
    if not bps:
        return None
    first = bps[0]
    candidates = sorted({b - first for b in bps if 0 < b - first <= max_period})
    for p in candidates:
        if t0 + 2 * p > trace.horizon:
            break
        if _repeats(funcs_step, funcs_pwl, t0, p):
            return p, t0
    return None


def _repeats(steps: list, pwls: list, t0: Rat, p: Rat) -> bool:
    def probe_points(bps):
        pts = {t0, t0 + p}
        pts.update(b for b in bps if t0 <= b < t0 + p)
        pts.update(b - p for b in bps if t0 + p <= b < t0 + 2 * p)
        return pts

    for f in steps:
        for t in probe_points(f.breakpoints):
            if step_eval(f, t) != step_eval(f, t + p):
                return False
    for f in pwls:
        for t in probe_points(f.breakpoints):
            if pwl_eval(f, t) != pwl_eval(f, t + p) or f.slope_at(t) != f.slope_at(t + p):
                return False
    return True


def report_to_dict(report: SimulationReport) -> dict:
    """JSON-ready summary; the trace itself is serialized separately."""
    def num(x):
        return "inf" if is_inf(x) else str(x)

    cert = report.termination_certificate
    per = report.periodicity
    return {
        "outcome": {"kind": report.outcome.kind,
                    "at": None if report.outcome.at is None else str(report.outcome.at)},
        "phases": len(report.trace.phases),
        "phase_boundaries": [str(t) for t in report.trace.phase_boundaries()],
        "termination_certificate": None if cert is None else {
            "time": str(cert.time), "volume": str(cert.volume), "bound": num(cert.bound)},
        "periodicity": None if per is None else {"period": str(per[0]), "from": str(per[1])},
        "gamma": [[str(t), str(g)] for t, g in report.gamma],
    }
