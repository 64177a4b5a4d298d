"""Exact rationals and piecewise functions of time.

All quantities are exact rationals of type ``Rat`` (GMP rationals, which
compare and hash like ``fractions.Fraction`` and mix with it freely).  Two
function shapes cover every quantity that varies with time:

* ``StepFunction``: right-constant, used for rates.
* ``PwlFunction``: continuous piecewise linear, used for queues, labels and
  cumulative volumes.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from gmpy2 import mpq

Rat = mpq
INF = math.inf

RatLike = Union[numbers.Rational, str]


def rat(x: RatLike) -> Rat:
    """Read an int, a rational or a "p/q" string as an exact rational.

    Floats are refused on purpose: they would smuggle rounding into exact data.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, Rat):
        return x
    if isinstance(x, numbers.Rational):
        return Rat(x.numerator, x.denominator)
    if isinstance(x, str):
        s = x.strip()
        if not s:
            raise ValueError("empty rational string")
        f = Fraction(s)
        return Rat(f.numerator, f.denominator)
    raise TypeError(f"cannot read {type(x).__name__} as an exact rational")


def rat_str(x) -> str:
    """Serialize as "p/q", or "p" when the denominator is one."""
    return str(rat(x))


def is_inf(x) -> bool:
    return x is INF or (isinstance(x, float) and math.isinf(x))


@dataclass(frozen=True)
class StepFunction:
    """Right-constant function.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``; outside
    ``[breakpoints[0], breakpoints[-1])`` the function equals ``default``.
    """

    breakpoints: tuple = ()
    values: tuple = ()
    default: Rat = Rat(0)

    def __post_init__(self):
        bps, vals = self.breakpoints, self.values
        if bps and len(vals) != len(bps) - 1:
            raise ValueError("need exactly one value per interval")
        if not bps and vals:
            raise ValueError("values without breakpoints")
        for a, b in zip(bps, bps[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly ascending")

    @staticmethod
    def from_segments(segments: Iterable[tuple], default: RatLike = 0) -> "StepFunction":
        """Build from ``(start, end, value)`` triples; gaps take ``default``.

        Adjacent pieces with equal values are merged so that the result is
        canonical and equality of functions is equality of objects.
        """
        d = rat(default)
        segs = sorted(((rat(a), rat(b), rat(v)) for a, b, v in segments), key=lambda s: s[0])
        pieces: list = []
        for a, b, v in segs:
            if a > b:
                raise ValueError("segment with start after end")
            if a == b:
                continue
            if pieces and a < pieces[-1][1]:
                raise ValueError("overlapping segments")
            if pieces and a > pieces[-1][1]:
                pieces.append([pieces[-1][1], a, d])
            if pieces and pieces[-1][2] == v:
                pieces[-1][1] = b
            else:
                pieces.append([a, b, v])
        while pieces and pieces[0][2] == d:
            pieces.pop(0)
        while pieces and pieces[-1][2] == d:
            pieces.pop()
        if not pieces:
            return StepFunction((), (), d)
        bps = tuple(p[0] for p in pieces) + (pieces[-1][1],)
        return StepFunction(bps, tuple(p[2] for p in pieces), d)

    def segments(self) -> list:
        """``(start, end, value)`` for each finite interval."""
        return [(self.breakpoints[k], self.breakpoints[k + 1], v) for k, v in enumerate(self.values)]

    def support_end(self) -> Rat:
        """Last time at which the value differs from the default (0 if never)."""
        return self.breakpoints[-1] if self.breakpoints else Rat(0)

    def __call__(self, t) -> Rat:
        return step_eval(self, t)


def step_eval(f: StepFunction, t: RatLike) -> Rat:
    """Right-limit value at ``t``."""
    t = rat(t)
    bps = f.breakpoints
    if not bps or t < bps[0] or t >= bps[-1]:
        return f.default
    lo, hi = 0, len(bps) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bps[mid] <= t:
            lo = mid
        else:
            hi = mid
    return f.values[lo]


@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise linear function.

    On ``[breakpoints[k], breakpoints[k+1])`` the function is
    ``values[k] + slopes[k] * (t - breakpoints[k])``; the last piece extends to
    infinity and the function is constant ``values[0]`` before the first
    breakpoint.
    """

    breakpoints: tuple = (Rat(0),)
    values: tuple = (Rat(0),)
    slopes: tuple = (Rat(0),)

    def __post_init__(self):
        bps = self.breakpoints
        if not bps or len(bps) != len(self.values) or len(bps) != len(self.slopes):
            raise ValueError("breakpoints, values and slopes must align and be nonempty")
        for k in range(len(bps) - 1):
            if not bps[k] < bps[k + 1]:
                raise ValueError("breakpoints must be strictly ascending")
            expect = self.values[k] + self.slopes[k] * (bps[k + 1] - bps[k])
            if expect != self.values[k + 1]:
                raise ValueError(f"discontinuity at {bps[k + 1]}")

    @staticmethod
    def from_points(points: Sequence[tuple]) -> "PwlFunction":
        """Build from ``(time, value, slope)`` triples, merging collinear pieces."""
        bps: list = []
        vals: list = []
        slopes: list = []
        for t, v, s in points:
            t, v, s = rat(t), rat(v), rat(s)
            if slopes and slopes[-1] == s:
                continue
            bps.append(t)
            vals.append(v)
            slopes.append(s)
        if not bps:
            return PwlFunction()
        return PwlFunction(tuple(bps), tuple(vals), tuple(slopes))

    @staticmethod
    def constant(c: RatLike = 0) -> "PwlFunction":
        return PwlFunction((Rat(0),), (rat(c),), (Rat(0),))

    def points(self) -> list:
        return list(zip(self.breakpoints, self.values, self.slopes))

    def slope_at(self, t: RatLike) -> Rat:
        """Right derivative at ``t``."""
        t = rat(t)
        k = _piece_index(self.breakpoints, t)
        return Rat(0) if k < 0 else self.slopes[k]

    def __call__(self, t) -> Rat:
        return pwl_eval(self, t)

    def __sub__(self, other: "PwlFunction") -> "PwlFunction":
        return pwl_combine(self, other, -1)

    def __add__(self, other: "PwlFunction") -> "PwlFunction":
        return pwl_combine(self, other, 1)


def _piece_index(bps: tuple, t: Rat) -> int:
    if t < bps[0]:
        return -1
    lo, hi = 0, len(bps)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bps[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


def pwl_eval(f: PwlFunction, t: RatLike) -> Rat:
    t = rat(t)
    k = _piece_index(f.breakpoints, t)
    if k < 0:
        return f.values[0]
    return f.values[k] + f.slopes[k] * (t - f.breakpoints[k])


def pwl_combine(f: PwlFunction, g: PwlFunction, sign: int) -> PwlFunction:
    """``f + sign * g`` on the union of breakpoints."""
    times = sorted(set(f.breakpoints) | set(g.breakpoints))
    pts = []
    for t in times:
        pts.append((t, pwl_eval(f, t) + sign * pwl_eval(g, t), f.slope_at(t) + sign * g.slope_at(t)))
    return PwlFunction.from_points(pts)


def step_integrate(f: StepFunction) -> PwlFunction:
    """Antiderivative vanishing at time 0.

    The default value is assumed to hold only after the support; before time
    0 the result is the constant 0, which is the convention for rates that
    start at or after time 0.
    """
    if f.breakpoints and f.breakpoints[0] < 0:
        raise ValueError("rates must not start before time 0")
    pts = [(Rat(0), Rat(0), f.default if not f.breakpoints or f.breakpoints[0] > 0 else f.values[0])]
    acc = Rat(0)
    prev_t = Rat(0)
    prev_rate = pts[0][2]
    knots = list(f.breakpoints)
    for k, t in enumerate(knots):
        if t <= 0:
            continue
        acc += prev_rate * (t - prev_t)
        rate = f.values[k] if k < len(f.values) else f.default
        pts.append((t, acc, rate))
        prev_t, prev_rate = t, rate
    return PwlFunction.from_points(pts)


def pwl_first_meet(g: PwlFunction, h: PwlFunction, t0: RatLike):
    """Smallest ``t >= t0`` with ``g(t) == h(t)``, or ``None``.

    Requires ``g(t0) <= h(t0)``.  The answer is the exact root of the first
    linear piece of ``h - g`` that reaches zero.
    """
    t0 = rat(t0)
    d = h - g
    if pwl_eval(d, t0) < 0:
        raise ValueError("precondition g(t0) <= h(t0) violated")
    knots = [b for b in d.breakpoints if b > t0]
    start = t0
    for end in knots + [None]:
        v = pwl_eval(d, start)
        if v == 0:
            return start
        s = d.slope_at(start)
        if s < 0:
            root = start + v / (-s)
            if end is None or root < end:
                return root
        if end is None:
            return None
        start = end
    return None


def rat_gcd(values: Iterable[Rat]) -> Rat:
    """Largest rational g with every value an integer multiple of g."""
    num = 0
    den = 1
    for v in values:
        v = Rat(v)
        num = math.gcd(num, v.numerator)
        den = den * v.denominator // math.gcd(den, v.denominator)
    if num == 0:
        return Rat(0)
    # gcd(p_i/q_i) = gcd(p_i) / lcm(q_i) once every fraction is reduced
    return Rat(num, den)
