"""Exact linear feasibility by a phase-one simplex over exact rationals.

Only feasibility is needed by the thin-flow search, so there is no phase two.
Bland's rule guarantees termination on degenerate problems.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .numerics import Rat

Row = tuple  # (dict var -> coefficient, rhs)


def find_feasible(num_vars: int, eq_rows: Sequence[Row] = (), le_rows: Sequence[Row] = (),
                  free: Sequence[int] = ()) -> Optional[list]:
    """A point satisfying all rows, or ``None`` when the system is infeasible.

    Variables are nonnegative unless listed in ``free``.  ``eq_rows`` are
    ``sum coef*x == rhs`` and ``le_rows`` are ``sum coef*x <= rhs``.
    """
    free = set(free)
    # column layout: one column per variable, a second (negated) one for free vars
    col_of = {}
    neg_col_of = {}
    ncols = 0
    for j in range(num_vars):
        col_of[j] = ncols
        ncols += 1
        if j in free:
            neg_col_of[j] = ncols
            ncols += 1
    n_slack = len(le_rows)
    slack0 = ncols
    ncols += n_slack

    rows = []
    rhs = []
    basis = []
    need_art = []
    for kind, source in (("eq", eq_rows), ("le", le_rows)):
        for coefs, b in source:
            row = [Rat(0)] * ncols
            for j, c in coefs.items():
                c = Rat(c)
                row[col_of[j]] += c
                if j in neg_col_of:
                    row[neg_col_of[j]] -= c
            b = Rat(b)
            slack = None
            if kind == "le":
                slack = slack0 + (len(rows) - len(eq_rows))
                row[slack] = Rat(1)
            if b < 0:
                row = [-c for c in row]
                b = -b
            rows.append(row)
            rhs.append(b)
            if slack is not None and row[slack] == 1:
                basis.append(slack)
                need_art.append(False)
            else:
                basis.append(None)
                need_art.append(True)

    art0 = ncols
    for i, need in enumerate(need_art):
        if need:
            for r in rows:
                r.append(Rat(0))
            rows[i][ncols] = Rat(1)
            basis[i] = ncols
            ncols += 1
    n_art = ncols - art0
    for r in rows:
        if len(r) < ncols:
            r.extend([Rat(0)] * (ncols - len(r)))

    if n_art:
        # reduced costs of the phase-one objective: sum of artificials
        cost = [Rat(0)] * ncols
        for i, bv in enumerate(basis):
            if bv >= art0:
                for j in range(ncols):
                    cost[j] -= rows[i][j]
        for j in range(art0, ncols):
            cost[j] += 1
        while True:
            enter = next((j for j in range(ncols) if cost[j] < 0), None)
            if enter is None:
                break
            leave = None
            best = None
            for i in range(len(rows)):
                a = rows[i][enter]
                if a > 0:
                    ratio = rhs[i] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best = ratio
                        leave = i
            if leave is None:
                # unbounded direction cannot occur for a bounded-below objective
                break
            _pivot(rows, rhs, cost, leave, enter)
            basis[leave] = enter
        if sum(rhs[i] for i, bv in enumerate(basis) if bv >= art0) != 0:
            return None

    values = [Rat(0)] * ncols
    for i, bv in enumerate(basis):
        values[bv] = rhs[i]
    point = []
    for j in range(num_vars):
        v = values[col_of[j]]
        if j in neg_col_of:
            v -= values[neg_col_of[j]]
        point.append(v)
    return point


def _pivot(rows, rhs, cost, r, c) -> None:
    prow = rows[r]
    p = prow[c]
    if p != 1:
        inv = 1 / p
        rows[r] = prow = [x * inv for x in prow]
        rhs[r] = rhs[r] * inv
    nz = [j for j, x in enumerate(prow) if x]
    for i in range(len(rows)):
        if i == r:
            continue
        f = rows[i][c]
        if f:
            row = rows[i]
            for j in nz:
                row[j] -= f * prow[j]
            rhs[i] -= f * rhs[r]
    f = cost[c]
    if f:
        for j in nz:
            cost[j] -= f * prow[j]


def check_point(point: Sequence[Rat], eq_rows: Sequence[Row] = (), le_rows: Sequence[Row] = (),
                free: Sequence[int] = ()) -> bool:
    free = set(free)
    for j, v in enumerate(point):
        if j not in free and v < 0:
            return False
    for coefs, b in eq_rows:
        if sum(Rat(c) * point[j] for j, c in coefs.items()) != b:
            return False
    for coefs, b in le_rows:
        if sum(Rat(c) * point[j] for j, c in coefs.items()) > b:
            return False
    return True
