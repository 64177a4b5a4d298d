from hypothesis import given, settings, strategies as st

from ideflow.lp import check_point, find_feasible
from ideflow.numerics import Rat


def test_simple_feasible():
    # x + y = 3, x <= 1
    pt = find_feasible(2, eq_rows=[({0: Rat(1), 1: Rat(1)}, Rat(3))], le_rows=[({0: Rat(1)}, Rat(1))])
    assert pt is not None and pt[0] + pt[1] == 3 and pt[0] <= 1


def test_infeasible():
    assert find_feasible(1, eq_rows=[({0: Rat(1)}, Rat(-1))]) is None


def test_free_variable_can_go_negative():
    pt = find_feasible(1, eq_rows=[({0: Rat(1)}, Rat(-5, 2))], free=[0])
    assert pt == [Rat(-5, 2)]


@settings(max_examples=60)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=4),
       st.lists(st.integers(0, 4), min_size=3, max_size=3))
def test_finds_point_when_one_exists(rows, witness):
    # rhs built from a known nonnegative point, so the system is feasible
    eq = [({j: Rat(c) for j, c in enumerate(r) if c}, Rat(sum(c * w for c, w in zip(r, witness))))
          for r in rows]
    pt = find_feasible(3, eq_rows=eq)
    assert pt is not None
    assert check_point(pt, eq_rows=eq)
