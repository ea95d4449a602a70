"""Verdict container shared by every class and inequality check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

_ORDER = {HOLDS: 0, INCONCLUSIVE: 1, FAILS: 2}


@dataclass(frozen=True)
class ClassVerdict:
    """Outcome of a reliability-class or inequality check.

    ``witness`` is required when ``status == "fails"``: a mapping holding the
    grid point (or index) and the two compared values ``lhs``/``rhs`` where
    ``lhs <= rhs`` was supposed to hold.  ``margin`` is the smallest slack
    ``rhs - lhs`` observed over the evaluated points.
    """

    status: str
    witness: dict[str, Any] | None = None
    margin: float | None = None
    notes: tuple[str, ...] = ()
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in _ORDER:
            raise ValueError(f"unknown verdict status {self.status!r}")
        if self.status == FAILS and self.witness is None:
            raise ValueError("a failing verdict needs a witness")

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def fails(self) -> bool:
        return self.status == FAILS

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "witness": plain(self.witness),
            "margin": plain(self.margin),
            "notes": list(self.notes),
            "details": plain(self.details),
        }


def worst(statuses) -> str:
    """Combine statuses: any fail wins, then inconclusive, then holds."""
    result = HOLDS
    for s in statuses:
        if _ORDER[s] > _ORDER[result]:
            result = s
    return result


def plain(obj):
    # numpy scalars/arrays -> JSON-friendly python objects
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, ClassVerdict):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return plain(obj.tolist())
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    return str(obj)
