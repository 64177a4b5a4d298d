from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from ideflow.instances import (BUILTINS, GADGET_EDGES, ParamError, RandomParams, builtin, gen_example3,
                               gen_fig2, gen_gadget_graph, gen_gadget_smoke, gen_nonuniqueness, gen_random)
from ideflow.network import load_instance, save_instance
from ideflow.numerics import Rat, step_eval, step_integrate, pwl_eval


def test_fig2_shape():
    inst = gen_fig2()
    assert len(inst.edges) == 5
    e = inst.edge_by_id["s1t"]
    assert (e.tau, e.nu) == (3, 1)
    assert step_eval(inst.commodity_by_id["2"].inflow, Rat(3, 2)) == 4


def test_example3_shape():
    inst = gen_example3()
    assert (inst.edge_by_id["ws"].tau, inst.edge_by_id["ws"].nu) == (1, 6)
    assert (inst.edge_by_id["wt"].tau, inst.edge_by_id["wt"].nu) == (1, 1)
    assert pwl_eval(step_integrate(inst.commodities[0].inflow), 10) == 16


def test_nonuniqueness_shape():
    inst = gen_nonuniqueness()
    e = inst.edge_by_id
    assert e["sv"].tau + e["vt"].tau == e["sw"].tau + e["wt"].tau == 2
    assert (e["wt"].tau, e["wt"].nu) == (1, 1)
    assert e["sv"].nu == e["sw"].nu == 2


@pytest.fixture(scope="module")
def two_sink():
    return gen_gadget_graph("TwoSink")


def test_gadget_a_block(two_sink):
    names = {v.rsplit(".", 1)[0] for v in two_sink.nodes if v.endswith(".v1")}
    one = sorted(names)[0]
    inner = [e for e in two_sink.edges if e.tail.startswith(one + ".v") and e.head.startswith(one + ".v")]
    assert len({v for v in two_sink.nodes if v.startswith(one + ".v")}) == 7
    assert len(inner) == len(GADGET_EDGES) == 8


def test_two_sink_all_unit(two_sink):
    assert {(e.tau, e.nu) for e in two_sink.edges} == {(1, 1)}


def test_two_sink_commodities(two_sink):
    assert len(two_sink.commodities) == 270
    for c in two_sink.commodities:
        (a, b, r), = c.inflow.segments()
        assert r == 2 and b == a + 1 and 0 <= a <= 4
        assert c.source.endswith(".v1")
    # node naming C{copy}.B{j}+{k}.A{m}.v{n}
    assert all(c.source.startswith(("C0.B", "C1.B")) for c in two_sink.commodities)
    assert Counter(c.sink for c in two_sink.commodities) == {"t": 135, "t'": 135}


def test_single_source_structure():
    inst = gen_gadget_graph("SingleSource")
    assert {c.source for c in inst.commodities} == {"S"}
    assert {c.sink for c in inst.commodities} == {"t", "t'"}


def test_unknown_gadget_kind():
    with pytest.raises(ParamError):
        gen_gadget_graph("ThreeSink")


def test_builtins_validate():
    for name in BUILTINS:
        inst = builtin(name)
        assert load_instance(save_instance(inst)) == inst
    with pytest.raises(ParamError):
        builtin("nope")


def test_random_seed_determinism():
    p = RandomParams(n=5, m=8)
    assert save_instance(gen_random(1, p)) == save_instance(gen_random(1, p))


def test_random_param_errors():
    for bad in (RandomParams(n=1), RandomParams(n=5, m=2), RandomParams(sinks=0), RandomParams(commodities=0)):
        with pytest.raises(ParamError):
            gen_random(0, bad)


@settings(max_examples=50)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_random_acyclic_has_topological_order(seed, sinks):
    inst = gen_random(seed, RandomParams(n=6, m=10, sinks=sinks, acyclic=True))
    idx = {v: int(v[1:]) for v in inst.nodes}
    assert all(idx[e.tail] < idx[e.head] for e in inst.edges)


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_single_sink_family(seed):
    inst = gen_random(seed, RandomParams(n=6, m=10, sinks=1, commodities=3))
    assert inst.common_sink is not None
    assert {e.tau for e in inst.edges} <= {Rat(k, 4) for k in range(1, 17)}
