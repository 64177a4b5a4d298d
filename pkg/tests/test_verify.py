import copy

import pytest

from ideflow import EngineConfig, simulate
from ideflow.flowstate import FlowTrace
from ideflow.instances import gen_example3, gen_fig2, gen_nonuniqueness
from ideflow.numerics import PwlFunction, Rat, StepFunction
from ideflow.verify import (FEASIBILITY_CONDITIONS, _Reconstruction, reconstruct_queue, verify_feasible, verify_ide,
                            verify_termination)

from mutations import mutate
from oracles import F, fluid_queue


def _passes(inst, trace):
    return verify_feasible(inst, trace).passed and verify_ide(inst, trace).passed


def test_engine_traces_pass(fig2_report, example3_report):
    assert _passes(gen_fig2(), fig2_report.trace)
    assert _passes(gen_example3(), example3_report.trace)
    rep = simulate(gen_nonuniqueness(), EngineConfig(10))
    assert _passes(gen_nonuniqueness(), rep.trace)


def test_verdict_lists_every_condition(fig2_report):
    v = verify_feasible(gen_fig2(), fig2_report.trace)
    assert [c.condition for c in v.checks] == list(FEASIBILITY_CONDITIONS)


def test_phantom_outflow_fails_with_witness(fig2_report):
    tr = copy.deepcopy(fig2_report.trace)
    tr.instance = fig2_report.trace.instance
    # capacity-rate outflow on an edge that never carries flow
    tr.outflows[("2", "s1v")] = StepFunction.from_segments([(0, 1, 2)])
    v = verify_feasible(gen_fig2(), tr)
    check = v.get("outflow_capacity_fifo")
    assert not check.passed and check.witness.element == "s1v"


def test_negative_queue_fails(fig2_report):
    tr = copy.deepcopy(fig2_report.trace)
    tr.instance = fig2_report.trace.instance
    tr.queues["s1t"] = PwlFunction((Rat(0),), (Rat(0),), (Rat(-1),))
    v = verify_feasible(gen_fig2(), tr)
    assert not v.get("queue_nonneg").passed


def _fig2_split(x_direct, x_detour):
    """fig2 trace prefix on [0, 1) with commodity 1 split as given."""
    inst = gen_fig2()
    tr = FlowTrace(inst, Rat(1))
    tr.inflows[("1", "s1t")] = StepFunction.from_segments([(0, 1, x_direct)])
    tr.inflows[("1", "s1v")] = StepFunction.from_segments([(0, 1, x_detour)])
    rec = _Reconstruction(inst, tr)
    tr.outflows.update({k: f for k, f in rec.outflows.items() if f.breakpoints})
    tr.queues.update({e: q for e, q in rec.queues.items() if any(s for _, _, s in q.points())})
    return inst, tr


def test_fig2_equilibrium_split_accepted():
    inst, tr = _fig2_split(1, 2)
    assert verify_feasible(inst, tr).passed
    assert verify_ide(inst, tr).passed


def test_fig2_all_direct_split_rejected():
    inst, tr = _fig2_split(3, 0)
    assert verify_feasible(inst, tr).passed
    v = verify_ide(inst, tr)
    assert not v.get("inflow_on_active_edges").passed
    assert v.get("inflow_on_active_edges").witness.element == "s1t"


def test_zero_flow_trace_passes():
    inst = gen_fig2()
    empty = type(inst)(inst.nodes, inst.edges, tuple(
        type(c)(c.id, c.source, c.sink, StepFunction()) for c in inst.commodities))
    tr = FlowTrace(empty, Rat(2))
    assert _passes(empty, tr)
    assert verify_termination(empty, tr, 0).passed


def test_termination_at_reported_time(example3_report):
    at = example3_report.outcome.at
    assert verify_termination(gen_example3(), example3_report.trace, at).passed
    assert not verify_termination(gen_example3(), example3_report.trace, at - 1).passed


def test_reconstructed_queue_matches_fluid_oracle():
    segs = [(0, 1, 3), (1, 3, Rat(1, 2)), (4, 5, 2)]
    f = StepFunction.from_segments(segs)
    q = reconstruct_queue(Rat(1), {"1": f}, Rat(8))
    ref = fluid_queue(1, [(F(a), F(b), F(r)) for a, b, r in segs], 8)
    for k in range(33):
        t = Rat(k, 4)
        assert F(q(t)) == ref(F(t))


@pytest.mark.parametrize("seed", range(20))
def test_mutations_detected(example3_report, seed):
    mutant, what = mutate(example3_report.trace, seed)
    inst = gen_example3()
    v = verify_feasible(inst, mutant)
    if v.passed:
        v = verify_ide(inst, mutant)
    assert not v.passed, what
