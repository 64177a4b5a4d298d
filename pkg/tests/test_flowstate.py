import json

import pytest
from hypothesis import given, settings, strategies as st

from ideflow import EngineConfig, simulate
from ideflow.flowstate import (Event, InternalError, derive_outflow, exit_rates, exit_time, load_trace,
                               node_inflow, queue_length, save_trace, trace_to_csv, volumes)
from ideflow.network import Edge, load_instance
from ideflow.numerics import Rat, pwl_eval, step_eval, step_integrate

from oracles import F, fluid_queue


def _single_edge(tau, nu, segments):
    doc = {"nodes": ["s", "t"],
           "edges": [{"id": "st", "tail": "s", "head": "t", "tau": str(tau), "nu": str(nu)}],
           "commodities": [{"id": "1", "source": "s", "sink": "t",
                            "inflow": [{"from": str(a), "to": str(b), "rate": str(r)} for a, b, r in segments]}]}
    return load_instance(json.dumps(doc))


def test_queue_fig2_s2t_at_2(fig2_report):
    assert queue_length(fig2_report.trace, "s2t", 2) == 3


def test_all_queues_zero_at_start(fig2_report, example3_report):
    for rep in (fig2_report, example3_report):
        for e in rep.trace.instance.edges:
            assert queue_length(rep.trace, e.id, 0) == 0


def test_queue_example3_sv_at_1(example3_report):
    assert queue_length(example3_report.trace, "sv", 1) == 7


def test_exit_time_empty_edge():
    rep = simulate(_single_edge(1, 1, [(0, 1, 1)]), EngineConfig(3))
    assert exit_time(rep.trace, "st", 0) == 1


def test_exit_time_after_queue_builds():
    rep = simulate(_single_edge(1, 1, [(0, 1, 2)]), EngineConfig(4))
    assert fluid_queue(1, [(0, 1, 2)], 4)(1) == 1
    assert exit_time(rep.trace, "st", 1) == 3


def test_exit_time_example3_st(example3_report):
    assert exit_time(example3_report.trace, "st", 1) == 5


def test_derive_outflow_proportional_shares():
    e = Edge("e", "a", "b", Rat(1), Rat(2))
    t0, t1, out = derive_outflow(e, Rat(0), {"1": Rat(2), "2": Rat(2)}, Rat(0), Rat(1))
    assert out == {"1": 1, "2": 1}
    assert (t0, t1) == (1, 3)


def test_derive_outflow_zero():
    e = Edge("e", "a", "b", Rat(1), Rat(1))
    assert derive_outflow(e, Rat(0), {}, Rat(0), Rat(1))[2] == {}


def test_derive_outflow_refuses_negative_queue():
    e = Edge("e", "a", "b", Rat(1), Rat(1))
    with pytest.raises(InternalError):
        derive_outflow(e, Rat(1), {}, Rat(0), Rat(2))


def test_fig2_s2t_outflow_at_capacity(fig2_report):
    f = fig2_report.trace.outflow("2", "s2t")
    assert step_eval(f, 2) == 1 and step_eval(f, Rat(11, 2)) == 1
    assert step_eval(fig2_report.trace.outflow("1", "s2t"), Rat(5, 2)) == 0


def test_node_inflow_fig2_s2(fig2_report):
    assert node_inflow(fig2_report.trace, "1", "s2", 2) == 2


def test_node_inflow_example3_w(example3_report):
    assert node_inflow(example3_report.trace, "1", "w", 2) == 7


def test_node_inflow_quiet_node(fig2_report):
    assert node_inflow(fig2_report.trace, "2", "v", 0) == 0


def test_volumes_start():
    v = volumes(simulate(_single_edge(1, 1, [(0, 1, 1)]), EngineConfig(3)).trace, 0)
    assert v.total == 0 and v.arrived == 0 and set(v.edge_loads.values()) == {0}


def test_volumes_fig2_at_2(fig2_report):
    tr = fig2_report.trace
    # oracle: integrate every stored rate directly
    arrived = sum((pwl_eval(step_integrate(f), 2) for (i, e), f in tr.outflows.items()
                   if tr.instance.edge_by_id[e].head == "t"), Rat(0))
    v = volumes(tr, 2)
    assert v.arrived == arrived == 0
    assert v.total == 3 + 4 - arrived


def test_volumes_after_example3_terminates(example3_report):
    v = volumes(example3_report.trace, example3_report.outcome.at)
    assert v.total == 0 and v.arrived == 16


def test_event_json_round_trip():
    ev = Event("EdgeActivated", edge="ws", commodity="1")
    assert Event.from_json(ev.to_json()) == ev


def test_trace_json_round_trip(example3_report):
    text = save_trace(example3_report.trace)
    again = load_trace(text, example3_report.trace.instance)
    assert save_trace(again) == text


def test_load_trace_malformed():
    with pytest.raises(ValueError):
        load_trace('{"phases": []}')


def test_csv_header_and_rows(fig2_report):
    lines = trace_to_csv(fig2_report.trace).splitlines()
    assert lines[0] == "time,kind,commodity,edge,value"
    assert "0,inflow,1,s1v,2" in lines


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 6)), min_size=1, max_size=4),
       st.integers(1, 3), st.integers(1, 3))
def test_single_edge_queue_matches_fluid_oracle(pieces, tau, nu):
    segs, t = [], 0
    for length, rate in pieces:
        segs.append((t, t + length, rate))
        t += length
    if not any(r for _, _, r in segs):
        segs[0] = (segs[0][0], segs[0][1], 1)
    horizon = t + sum((b - a) * r for a, b, r in segs) + tau + 1
    rep = simulate(_single_edge(tau, nu, segs), EngineConfig(horizon))
    q = fluid_queue(nu, segs, horizon)
    grid = [Rat(k, 4) for k in range(4 * int(rep.trace.horizon) + 1)]
    for x in grid:
        assert F(queue_length(rep.trace, "st", x)) == q(F(x))
    # total outflow equals total inflow once empty
    assert rep.outcome.kind == "Terminated"
    out = pwl_eval(step_integrate(rep.trace.outflow("1", "st")), rep.outcome.at)
    assert out == sum(Rat(b - a) * r for a, b, r in segs)


@given(st.integers(0, 5), st.integers(1, 4), st.integers(0, 8), st.integers(0, 8))
def test_exit_rates_keep_shares(q, nu, r1, r2):
    e = Edge("e", "a", "b", Rat(1), Rat(nu))
    out = exit_rates(e, Rat(q), {"1": Rat(r1), "2": Rat(r2)})
    total = sum(out.values(), Rat(0))
    if r1 + r2 == 0:
        assert out == {}
        return
    assert total == (nu if (q > 0 or r1 + r2 > nu) else r1 + r2)
    assert out.get("1", 0) * (r1 + r2) == total * r1
