from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from rclab.exceptions import LatticeError
from rclab.models.lattice import LatticePoint


@dataclass(frozen=True, eq=False)
class SparseDistribution:
    """Sub-probability vector on a cropped window of Z^d.

    ``values[i_1, ..., i_d]`` is the mass at ``origin + (i_1, ..., i_d)``.
    Mass dropped by truncation is accumulated in ``lost_mass_bound``.
    """
    origin: Tuple[int, ...]
    values: np.ndarray
    lost_mass_bound: float = 0.0

    def __post_init__(self) -> None:
        if self.values.ndim != len(self.origin):
            raise LatticeError(
                f"Window of rank {self.values.ndim} with an origin of dimension {len(self.origin)}."
            )

    @classmethod
    def delta(cls, p: LatticePoint) -> SparseDistribution:
        return cls(p.coords, np.ones((1,) * p.d, dtype=np.float64), 0.0)

    @property
    def d(self) -> int:
        return len(self.origin)

    def _index(self, p: LatticePoint) -> Optional[Tuple[int, ...]]:
        if p.d != self.d:
            raise LatticeError(f"Point of dimension {p.d} read from a {self.d}-dimensional distribution.")
        idx = tuple(c - o for c, o in zip(p.coords, self.origin))
        if all(0 <= i < n for i, n in zip(idx, self.values.shape)):
            return idx
        return None

    def get(self, p: LatticePoint) -> float:
        idx = self._index(p)
        return 0.0 if idx is None else float(self.values[idx])

    def items(self) -> Iterator[Tuple[LatticePoint, float]]:
        """Support points with their mass, in lexicographic order."""
        for idx in zip(*np.nonzero(self.values)):
            coords = tuple(int(i) + o for i, o in zip(idx, self.origin))
            yield LatticePoint(coords), float(self.values[idx])

    def as_dict(self) -> Dict[LatticePoint, float]:
        return dict(self.items())

    def total_mass(self) -> float:
        return float(self.values.sum())

    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))

    def support_linf(self) -> int:
        """Largest sup-norm of a point carrying mass, -1 if there is none."""
        nz = np.nonzero(self.values)
        if not nz[0].size:
            return -1
        return max(
            int(np.max(np.abs(axis_idx + o))) for axis_idx, o in zip(nz, self.origin)
        )

    def mass_within(self, radius: int) -> float:
        """Mass on the plain box [-radius, radius]^d."""
        window = []
        for o, n in zip(self.origin, self.values.shape):
            lo = max(0, -radius - o)
            hi = min(n, radius - o + 1)
            if hi <= lo:
                return 0.0
            window.append(slice(lo, hi))
        return float(self.values[tuple(window)].sum())


@dataclass(frozen=True)
class SeriesPoint:
    n: int
    value: float
    err_bound: float


@dataclass
class ReturnSeries:
    """P^{2n}(0,0) on a grid of n, with truncation error bounds."""
    d: int
    gamma: Optional[float]
    seed: int
    law: str = ""
    tau: float = 0.0
    points: List[SeriesPoint] = field(default_factory=list)

    def ns(self) -> List[int]:
        return [p.n for p in self.points]

    def values(self) -> List[float]:
        return [p.value for p in self.points]

    def value_at(self, n: int) -> float:
        for p in self.points:
            if p.n == n:
                return p.value
        raise KeyError(n)

    def rows(self) -> List[Dict[str, object]]:
        return [{"n": p.n, "p2n": p.value, "err_bound": p.err_bound} for p in self.points]


@dataclass(frozen=True)
class SandwichReport:
    """Both sides of P^{2n}(0,0)/pi(0) >= P_0(X_n in B)^2 / pi(B)."""
    n: int
    box_radius: int
    return_probability: float
    err_bound: float
    box_mass: float
    box_pi_mass: float
    box_size: int
    pi_origin: float
    rhs_pi_form: float
    rhs_counting_form: float

    @property
    def holds(self) -> bool:
        lhs = (self.return_probability + self.err_bound) / self.pi_origin
        return lhs >= self.rhs_pi_form * (1 - 1e-12) and (
            self.return_probability + self.err_bound >= self.rhs_counting_form * (1 - 1e-12)
        )
