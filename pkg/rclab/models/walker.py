from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from rclab.exceptions import LatticeError
from rclab.models.lattice import LatticePoint


@dataclass(eq=False)
class Trajectory:
    """A nearest-neighbor path; ``positions[0]`` is the start."""
    positions: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.ndim != 2 or self.positions.shape[0] < 1:
            raise LatticeError("A trajectory needs a (length + 1, d) array of positions.")
        if self.positions.shape[0] > 1:
            jumps = np.abs(np.diff(self.positions, axis=0)).sum(axis=1)
            if np.any(jumps != 1):
                raise LatticeError("Consecutive trajectory points must be nearest neighbors.")

    @classmethod
    def from_points(cls, points: Sequence[LatticePoint], seed: int = 0) -> Trajectory:
        return cls(np.array([p.coords for p in points], dtype=np.int64), seed)

    @property
    def start(self) -> LatticePoint:
        return LatticePoint(tuple(int(c) for c in self.positions[0]))

    @property
    def length(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def steps(self) -> List[LatticePoint]:
        return [LatticePoint(tuple(int(c) for c in row)) for row in self.positions[1:]]

    def at(self, t: int) -> LatticePoint:
        return LatticePoint(tuple(int(c) for c in self.positions[t]))

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class HittingRecord:
    N: int
    time: int
    location: LatticePoint


@dataclass
class HittingResult:
    records: List[HittingRecord] = field(default_factory=list)
    truncated: bool = False

    def time(self, N: int) -> Optional[int]:
        for r in self.records:
            if r.N == N:
                return r.time
        return None


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with a 95% interval."""
    op: str
    params: Dict[str, Any]
    estimate: float
    ci_low: float
    ci_high: float
    replicas: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "op": self.op,
            "params": dict(self.params),
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicas": self.replicas,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SojournResult:
    estimate: Estimate
    exact: float
    stay_y: float
    stay_z: float
    per_jump_bound: Optional[float] = None

    @property
    def sigma(self) -> float:
        n = self.estimate.replicas
        return float(np.sqrt(max(self.exact * (1 - self.exact), 0.0) / n))
