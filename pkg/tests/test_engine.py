import json

import pytest
from hypothesis import given, settings, strategies as st

from ideflow import EngineConfig, builtin, simulate
from ideflow.engine import (_State, _sink_groups, detect_periodicity, max_feasible_alpha, plan_phase,
                            report_to_dict, termination_bound, termination_certificate)
from ideflow.flowstate import Event, queue_length, save_trace
from ideflow.instances import RandomParams, gen_example3, gen_fig2, gen_nonuniqueness, gen_random
from ideflow.network import load_instance
from ideflow.numerics import INF, Rat, step_eval
from ideflow.verify import verify_feasible, verify_ide


def _first_phase(inst, cfg=None):
    st_ = _State(inst)
    groups = _sink_groups(inst)
    cfg = cfg or EngineConfig(100)
    plan = plan_phase(st_, cfg, groups)
    return st_, plan, groups


def _advance_to(inst, theta):
    st_ = _State(inst)
    groups = _sink_groups(inst)
    cfg = EngineConfig(100)
    while st_.theta < theta:
        plan = plan_phase(st_, cfg, groups)
        alpha, _ = max_feasible_alpha(st_, plan, groups, cfg.horizon)
        st_.advance(plan, alpha)
    assert st_.theta == theta
    return st_, groups, cfg


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(0)
    with pytest.raises(ValueError):
        EngineConfig(1, max_phases=0)
    with pytest.raises(ValueError):
        EngineConfig(1, mode="fast")


def test_fig2_first_phase_alpha_and_event():
    st_, plan, groups = _first_phase(gen_fig2())
    alpha, events = max_feasible_alpha(st_, plan, groups, Rat(100))
    assert alpha == 1
    assert events[0] == Event("NetworkInflowBreakpoint", commodity="1")


def test_example3_phase_at_2_ends_with_activation():
    st_, groups, cfg = _advance_to(gen_example3(), Rat(2))
    plan = plan_phase(st_, cfg, groups)
    alpha, events = max_feasible_alpha(st_, plan, groups, cfg.horizon)
    assert alpha == Rat(1, 2)
    assert Event("EdgeActivated", edge="ws", commodity="1") in events


def test_example3_phase_at_1_ends_when_st_drains():
    st_, groups, cfg = _advance_to(gen_example3(), Rat(1))
    assert st_.q["st"] == 1
    plan = plan_phase(st_, cfg, groups)
    alpha, events = max_feasible_alpha(st_, plan, groups, cfg.horizon)
    assert alpha == 1
    assert Event("QueueDepleted", edge="st") in events
    assert [e.kind for e in events] == sorted((e.kind for e in events),
                                              key=["QueueDepleted", "EdgeActivated", "NetworkInflowBreakpoint",
                                                   "NodeInflowBreakpoint", "HorizonReached",
                                                   "NetworkEmpty"].index)


def test_fig2_simulation(fig2_report):
    tr = fig2_report.trace
    assert [(p.start, p.end) for p in tr.phases] == [(0, 1), (1, 2), (2, 3)]
    assert fig2_report.outcome.kind == "HorizonReached"


def test_example3_boundaries_and_termination(example3_report):
    b = set(example3_report.trace.phase_boundaries())
    assert {Rat(x) for x in ("0", "1", "2", "5/2", "7/2", "4", "9/2", "5")} <= b
    assert example3_report.outcome.kind == "Terminated"
    assert example3_report.outcome.at == Rat(25, 2)


def test_empty_inflow_terminates_immediately():
    doc = {"nodes": ["s", "t"], "edges": [{"id": "st", "tail": "s", "head": "t", "tau": "1", "nu": "1"}],
           "commodities": [{"id": "1", "source": "s", "sink": "t", "inflow": []}]}
    rep = simulate(load_instance(json.dumps(doc)), EngineConfig(5))
    assert rep.outcome.kind == "Terminated" and rep.outcome.at == 0
    assert rep.trace.phases == []


def test_phase_cap_outcome():
    rep = simulate(gen_example3(), EngineConfig(20, max_phases=3))
    assert rep.outcome.kind == "PhaseCapReached"
    assert len(rep.trace.phases) == 3


def test_certificate_with_zero_volume_and_infinite_bound():
    assert termination_certificate(Rat(3), Rat(0), Rat(1), Rat(3)).bound == 3
    assert termination_certificate(Rat(3), Rat(5), Rat(1), INF) is not None
    assert termination_certificate(Rat(0), Rat(0), Rat(1), Rat(3)) is None
    assert termination_certificate(Rat(3), Rat(0), Rat(1), None) is None


def test_example3_certificate_not_at_5(example3_report):
    gamma_at = dict(example3_report.gamma)
    bound = termination_bound(gen_example3())
    assert bound == 3
    assert gamma_at[Rat(5)] >= bound
    cert = example3_report.termination_certificate
    assert cert is not None and cert.time > 5 and cert.volume < bound


def test_modes_agree_on_single_sink():
    a = simulate(gen_example3(), EngineConfig(20, mode="waterfill"))
    b = simulate(gen_example3(), EngineConfig(20, mode="thinflow"))
    assert save_trace(a.trace) == save_trace(b.trace)


def test_waterfill_mode_needs_common_sink():
    with pytest.raises(ValueError):
        simulate(gen_random(1, RandomParams(n=6, m=9, sinks=2, commodities=3)), EngineConfig(3, mode="waterfill"))


def test_debug_checks_pass():
    for inst in (gen_fig2(), gen_example3(), gen_nonuniqueness()):
        simulate(inst, EngineConfig(20, debug_checks=True))


def test_gadget_smoke_pattern():
    # frozen exit paths: only the first pattern round, then everything drains
    rep = simulate(builtin("gadget-smoke"), EngineConfig(60))
    q = lambda t: queue_length(rep.trace, "A.v1->A.v2", t)
    assert q(1) == 1 and q(2) == 0
    assert rep.outcome.kind == "Terminated"


def test_periodicity_none_after_termination(example3_report):
    assert detect_periodicity(example3_report.trace, Rat(13), 3) is None


def test_report_json_is_serializable(example3_report):
    d = report_to_dict(example3_report)
    assert d["outcome"] == {"kind": "Terminated", "at": "25/2"}
    json.dumps(d)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.booleans())
def test_random_runs_verify_and_gamma_monotone(seed, multi):
    params = RandomParams(n=5, m=8, sinks=2 if multi else 1, acyclic=multi, commodities=2)
    inst = gen_random(seed, params)
    rep = simulate(inst, EngineConfig(200, debug_checks=True))
    assert rep.outcome.kind == "Terminated"
    assert verify_feasible(inst, rep.trace).passed
    assert verify_ide(inst, rep.trace).passed
    after = [g for t, g in rep.gamma if t >= inst.inflow_end]
    assert all(x >= y for x, y in zip(after, after[1:]))
