"""Per-node flow split for a single sink by water-filling.

At a node with current inflow ``b`` each active outgoing edge ``e = vw`` has a
marginal label function ``h_e(z) = g_e(z) / nu_e + a_w``: flat at ``beta`` up to
``gamma`` and rising with slope ``1/alpha`` afterwards.  The split equalizes
``h_e`` over the edges that receive flow; the common value is the label slope
``a_v`` of the node.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .numerics import Rat


@dataclass(frozen=True)
class HFunc:
    edge: str
    beta: Rat
    gamma: Rat
    alpha: Rat

    def __call__(self, z: Rat) -> Rat:
        if z <= self.gamma:
            return self.beta
        return self.beta + (z - self.gamma) / self.alpha

    def inverse_at(self, level: Rat) -> Rat:
        """Largest ``z`` with ``h(z) <= level`` (requires ``level >= beta``)."""
        return self.gamma + self.alpha * (level - self.beta)


@dataclass(frozen=True)
class Split:
    rates: dict        # edge id -> rate
    level: Rat


def build_h(edge_id: str, nu: Rat, a_head: Rat, queue: Rat, offset: Rat = Rat(0)) -> HFunc:
    """Marginal label function of an edge.

    ``offset`` is flow already fixed on the edge by other commodities; the
    function then describes the label growth of additional flow on top of it.
    """
    if queue < 0:
        raise ValueError("negative queue")
    if queue > 0:
        return HFunc(edge_id, a_head - 1 + offset / nu, Rat(0), nu)
    if offset >= nu:
        return HFunc(edge_id, a_head + (offset - nu) / nu, Rat(0), nu)
    return HFunc(edge_id, a_head, nu - offset, nu)


def sort_hs(hs: Sequence[HFunc]) -> list:
    return sorted(hs, key=lambda h: (h.beta, h.edge))


def waterfill(b: Rat, hs: Sequence[HFunc]) -> Split:
    """Distribute ``b`` over the edges of ``hs`` (sorted by beta, then edge id).

    Finds the largest prefix ``r`` (possibly empty) whose functions, raised
    to the prefix's highest beta, still hold at most ``b``.  Either the next function's beta
    is reached first (all of the prefix sits at that beta and the next edge
    takes the rest inside its flat part), or the residual is spread over the
    prefix in proportion to the slopes' reciprocals.
    """
    b = Rat(b)
    if b < 0:
        raise ValueError("negative inflow")
    hs = list(hs)
    if not hs:
        if b > 0:
            raise ValueError("positive inflow needs at least one edge")
        return Split({}, Rat(0))
    if any(hs[k].beta > hs[k + 1].beta for k in range(len(hs) - 1)):
        raise ValueError("h functions must be sorted by beta")
    rates = {h.edge: Rat(0) for h in hs}
    if b == 0:
        return Split(rates, hs[0].beta)

    def raised(h: HFunc, lam: Rat) -> Rat:
        return h.gamma + h.alpha * (lam - h.beta)

    p = len(hs)
    r = 0
    for k in range(1, p + 1):
        lam = hs[k - 1].beta
        if sum(raised(hs[i], lam) for i in range(k)) <= b:
            r = k
        else:
            break
    nxt = hs[r].beta if r < p else None
    if nxt is not None and sum(raised(hs[i], nxt) for i in range(r)) <= b:
        for i in range(r):
            rates[hs[i].edge] = raised(hs[i], nxt)
        rates[hs[r].edge] = b - sum(rates[hs[i].edge] for i in range(r))
        return Split(rates, nxt)
    lam = hs[r - 1].beta
    base = [raised(hs[i], lam) for i in range(r)]
    rest = b - sum(base)
    total_alpha = sum(hs[i].alpha for i in range(r))
    for i in range(r):
        rates[hs[i].edge] = base[i] + hs[i].alpha / total_alpha * rest
    return Split(rates, lam + rest / total_alpha)


def opt_objective(hs: Sequence[HFunc], z: dict) -> Rat:
    """Sum of the integrals of ``h_e`` from 0 to ``z_e``."""
    total = Rat(0)
    for h in hs:
        x = Rat(z.get(h.edge, 0))
        if x < 0:
            raise ValueError("negative rate")
        total += h.beta * x
        if x > h.gamma:
            total += (x - h.gamma) ** 2 / (2 * h.alpha)
    return total


def kkt_violation(b: Rat, hs: Sequence[HFunc], split: Split):
    """First violated optimality condition as a message, or ``None``."""
    if sum(split.rates.values()) != b:
        return f"rates sum to {sum(split.rates.values())}, expected {b}"
    for h in hs:
        z = split.rates.get(h.edge, Rat(0))
        if z < 0:
            return f"negative rate on {h.edge}"
        if z > 0 and h(z) != split.level:
            return f"edge {h.edge}: h(z)={h(z)} differs from level {split.level}"
        if z == 0 and h(Rat(0)) < split.level:
            return f"edge {h.edge}: unused but h(0)={h(Rat(0))} below level {split.level}"
    return None
