from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Certificate:
    """Named pass/fail verdict with the numbers it was decided on."""

    name: str
    passed: bool
    data: dict = field(default_factory=dict)
    tolerance: float = 0.0
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "tolerance": float(self.tolerance),
            "data": {k: _plain(v) for k, v in sorted(self.data.items())},
            "notes": list(self.notes),
        }


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in sorted(v.items())}
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, str) or v is None:
        return v
    return float(v)
