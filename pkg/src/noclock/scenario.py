"""Scenario configuration: schema, validation, JSON round-trip.

Numbers are carried as exact decimal strings or ints; floats are rejected so
a loaded scenario reproduces a run bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import List, Optional

from .timebase import frac


class ScenarioError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario: " + "; ".join(self.problems))


@dataclass
class Scenario:
    n: int = 4
    f: int = 1
    theta: str = "1.1"
    d: str = "1"
    T: Optional[str] = None              # default: 2*theta^2*d
    duration: str = "150"
    seed: int = 0
    protocol: dict = field(default_factory=lambda: {"name": "phase-king-silent"})
    adversary: dict = field(default_factory=lambda: {"byzantine": "silent",
                                                     "delays": "uniform"})
    oracle: dict = field(default_factory=lambda: {"kind": "const", "value": 1})
    clocks: dict = field(default_factory=lambda: {"rates": "random_steps"})
    corruption: dict = field(default_factory=lambda: {"kind": "none"})
    script: List[dict] = field(default_factory=list)
    clock_update_period: Optional[str] = None
    simplified_clocksync: bool = False

    def validate(self) -> None:
        problems = []
        theta = d = None
        try:
            theta = frac(self.theta)
            d = frac(self.d)
        except (TypeError, ValueError) as exc:
            problems.append(str(exc))
        if self.n < 2:
            problems.append(f"n={self.n} too small")
        if not (0 <= self.f and 3 * self.f < self.n):
            problems.append(f"resilience bound violated: need f < n/3, "
                            f"got n={self.n}, f={self.f}")
        if theta is not None and theta < 1:
            problems.append(f"theta={theta} below 1")
        if theta is not None and d is not None and self.T is not None:
            if frac(self.T) < 2 * theta * theta * d:
                problems.append(f"T={self.T} below 2*theta^2*d={2*theta*theta*d}")
        try:
            duration = frac(self.duration)
            if duration <= 0:
                problems.append("duration must be positive")
        except (TypeError, ValueError) as exc:
            duration = None
            problems.append(str(exc))
        byz = self.adversary.get("byzantine_set")
        if byz is not None and len(byz) > self.f:
            problems.append(f"byzantine_set larger than f={self.f}")
        if byz is not None and any(not (0 <= v < self.n) for v in byz):
            problems.append("byzantine_set contains invalid node ids")
        for entry in self.script:
            try:
                t = frac(entry["t"])
                if duration is not None and not (0 < t < duration):
                    problems.append(f"script time {entry['t']} outside run")
            except (KeyError, TypeError, ValueError):
                problems.append(f"malformed script entry {entry!r}")
            if not (0 <= entry.get("node", -1) < self.n):
                problems.append(f"script node {entry.get('node')} invalid")
        if self.protocol.get("name") not in ("phase-king-silent",):
            problems.append(f"unknown protocol {self.protocol.get('name')!r}")
        if problems:
            raise ScenarioError(problems)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        _reject_floats(data, path="scenario")
        try:
            sc = cls(**data)
        except TypeError as exc:
            raise ScenarioError([str(exc)]) from None
        sc.validate()
        return sc

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _reject_floats(obj, path: str) -> None:
    if isinstance(obj, float):
        raise ScenarioError([f"{path}: floats are not exact; use a string"])
    if isinstance(obj, dict):
        for k, v in obj.items():
            _reject_floats(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _reject_floats(v, f"{path}[{i}]")
