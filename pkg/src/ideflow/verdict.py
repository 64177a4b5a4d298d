"""Structured pass/fail reports with a first-violation witness per check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class Witness:
    commodity: Optional[str] = None
    element: Optional[str] = None   # edge or node id
    time: Optional[object] = None
    lhs: Optional[object] = None
    rhs: Optional[object] = None
    note: str = ""

    def to_json(self) -> dict:
        def enc(x):
            if x is None:
                return None
            if isinstance(x, float):
                return "inf" if x > 0 else "-inf"
            return str(x)
        return {"commodity": self.commodity, "element": self.element, "time": enc(self.time),
                "lhs": enc(self.lhs), "rhs": enc(self.rhs), "note": self.note}


@dataclass(frozen=True)
class Check:
    condition: str
    passed: bool
    witness: Optional[Witness] = None

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError("a failing check needs a witness")


@dataclass
class Verdict:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def get(self, condition: str) -> Check:
        for c in self.checks:
            if c.condition == condition:
                return c
        raise KeyError(condition)

    def extend(self, other: "Verdict") -> "Verdict":
        self.checks.extend(other.checks)
        return self

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"condition": c.condition, "passed": c.passed,
                 "witness": c.witness.to_json() if c.witness else None}
                for c in self.checks
            ],
        }


class CheckCollector:
    """Keeps the first failure per condition, in registration order."""

    def __init__(self, conditions):
        self._order = list(conditions)
        self._first: dict = {}

    def fail(self, condition: str, witness: Witness) -> None:
        if condition not in self._order:
            self._order.append(condition)
        self._first.setdefault(condition, witness)

    def failed(self, condition: str) -> bool:
        return condition in self._first

    def verdict(self) -> Verdict:
        return Verdict([Check(c, c not in self._first, self._first.get(c)) for c in self._order])
