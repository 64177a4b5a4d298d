from hypothesis import given, settings, strategies as st

from ideflow.instances import RandomParams, gen_example3, gen_fig2, gen_random
from ideflow.labels import compute_labels, instantaneous_cost, sink_labels, snapshot, tight_edges
from ideflow.network import reachable_from
from ideflow.numerics import INF, Rat


def test_cost_empty_edge():
    e = gen_example3().edge_by_id["st"]
    assert instantaneous_cost(e, Rat(0)) == 3


def test_cost_fig2_s2t_with_queue():
    assert instantaneous_cost(gen_fig2().edge_by_id["s2t"], Rat(3)) == 4


def test_cost_example3_st_at_1():
    assert instantaneous_cost(gen_example3().edge_by_id["st"], Rat(1)) == 4


def test_fig2_commodity2_direct_path():
    snap = compute_labels(gen_fig2(), {}, "2")
    assert snap.label("2", "s2") == 1
    assert snap.active["2"] >= {"s2t"} and "s2s1" not in snap.active["2"]


def test_fig2_tie_at_s2_with_queue_3():
    snap = compute_labels(gen_fig2(), {"s2t": Rat(3)}, "1")
    assert snap.label("1", "s2") == 4
    assert {"s2t", "s2s1"} <= snap.active["1"]


def test_sink_label_zero():
    assert sink_labels(gen_fig2(), {}, "t")["t"] == 0


def test_unreachable_is_infinite():
    snap = snapshot(gen_fig2(), {})
    assert snap.label("1", "t") == 0
    inst = gen_random(5, RandomParams(n=6, m=8, sinks=2))
    snap = snapshot(inst, {})
    for c in inst.commodities:
        for v in inst.nodes:
            if c.sink not in reachable_from(inst, v):
                assert snap.label(c.id, v) is INF


queues = st.dictionaries(st.sampled_from([f"e{k}" for k in range(10)]),
                         st.fractions(min_value=0, max_value=6, max_denominator=4))


@settings(max_examples=60)
@given(st.integers(0, 10**6), queues)
def test_active_edges_reach_sink_and_decrease(seed, q):
    inst = gen_random(seed, RandomParams(n=6, m=10))
    q = {k: Rat(v.numerator, v.denominator) for k, v in q.items()}
    sink = inst.commodities[0].sink
    lab = sink_labels(inst, q, sink)
    act = tight_edges(inst, q, lab)
    # every labelled node reaches the sink over active edges
    for v in lab:
        seen, todo = {v}, [v]
        while todo:
            u = todo.pop()
            for e in inst.out_edges[u]:
                if e.id in act and e.head not in seen:
                    seen.add(e.head)
                    todo.append(e.head)
        assert sink in seen
    for eid in act:
        e = inst.edge_by_id[eid]
        assert lab[e.tail] > lab[e.head]
    # Bellman optimality against every edge
    for e in inst.edges:
        if e.tail in lab and e.head in lab:
            assert lab[e.tail] <= lab[e.head] + instantaneous_cost(e, q.get(e.id, Rat(0)))
