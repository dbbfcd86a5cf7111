from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from rclab.exceptions import ParameterError

ROW_SUM_TOLERANCE = 1e-12
REVERSIBILITY_TOLERANCE = 1e-10


@dataclass(eq=False)
class FiniteChain:
    """Explicit Markov chain with a positive (unnormalized) invariant measure."""
    states: List[Hashable]
    P: np.ndarray
    pi: np.ndarray
    reversible: bool = True
    _lookup: Dict[Hashable, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.P = np.asarray(self.P, dtype=np.float64)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        k = len(self.states)
        if k == 0:
            raise ParameterError("A chain needs at least one state.")
        if self.P.shape != (k, k):
            raise ParameterError(f"Transition matrix has shape {self.P.shape}, expected ({k}, {k}).")
        if self.pi.shape != (k,):
            raise ParameterError(f"Measure has shape {self.pi.shape}, expected ({k},).")
        if np.any(self.P < 0):
            raise ParameterError("Transition probabilities must be non-negative.")
        if np.any(self.pi <= 0):
            raise ParameterError("The invariant measure must be positive on every state.")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > ROW_SUM_TOLERANCE:
            raise ParameterError("Rows of the transition matrix must sum to 1.")
        self._lookup = {s: i for i, s in enumerate(self.states)}
        if len(self._lookup) != k:
            raise ParameterError("State labels must be unique.")
        if self.reversible and self.reversibility_defect() > REVERSIBILITY_TOLERANCE:
            raise ParameterError(
                f"Chain flagged reversible but detailed balance fails by "
                f"{self.reversibility_defect():.3g}."
            )

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def Q(self) -> np.ndarray:
        """Edge measure Q(x, y) = pi(x) P(x, y)."""
        return self.pi[:, None] * self.P

    @property
    def adjacency(self) -> np.ndarray:
        a = (self.P > 0) | (self.P.T > 0)
        np.fill_diagonal(a, False)
        return a

    def __contains__(self, state: object) -> bool:
        return state in self._lookup

    def index(self, state: Hashable) -> int:
        try:
            return self._lookup[state]
        except KeyError:
            raise ParameterError(f"Unknown state {state!r}.") from None

    def indices(self, states: Iterable[Hashable]) -> List[int]:
        return sorted({self.index(s) for s in states})

    def holding(self) -> np.ndarray:
        return np.diag(self.P).copy()

    def reversibility_defect(self) -> float:
        q = self.Q
        return float(np.max(np.abs(q - q.T)))

    def power(self, n: int) -> np.ndarray:
        return np.linalg.matrix_power(self.P, n)

    def neighbor_masks(self) -> List[int]:
        """Adjacency as bitmasks, one per state."""
        adj = self.adjacency
        masks = []
        for i in range(self.size):
            m = 0
            for j in np.nonzero(adj[i])[0]:
                m |= 1 << int(j)
            masks.append(m)
        return masks


@dataclass(frozen=True)
class ProfileBreakpoint:
    r: float
    phi: float
    minimizer: Tuple[int, ...]


@dataclass
class IsoProfile:
    """Piecewise-constant isoperimetric profile.

    ``breakpoints`` are sorted by r; Phi(u) equals the phi of the last
    breakpoint with r <= u, and is infinite below the first one.
    """
    breakpoints: List[ProfileBreakpoint]
    certified: bool = True

    def evaluate(self, u: float) -> float:
        value = float("inf")
        for bp in self.breakpoints:
            if bp.r <= u:
                value = bp.phi
            else:
                break
        return value

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"r": bp.r, "phi": bp.phi, "minimizer_size": len(bp.minimizer)}
            for bp in self.breakpoints
        ]


@dataclass(frozen=True)
class MPCheck:
    x: int
    y: int
    n: int
    value: float
    bound: float
    informative: bool

    @property
    def holds(self) -> bool:
        return self.value <= self.bound + 1e-12

    @property
    def margin(self) -> float:
        return self.bound - self.value


@dataclass
class MPReport:
    epsilon: float
    sigma: float
    checks: List[MPCheck] = field(default_factory=list)
    note: str = ""

    @property
    def violations(self) -> List[MPCheck]:
        return [c for c in self.checks if c.informative and not c.holds]


@dataclass(frozen=True)
class SurfaceVolumeReport:
    size: int
    boundary_edges: int
    edge_measure: float
    pi_mass: float
    alpha: float
    precondition: bool
    surface_bound: float
    volume_bound: float

    @property
    def surface_holds(self) -> bool:
        return self.edge_measure >= self.surface_bound * (1 - 1e-12)

    @property
    def volume_holds(self) -> bool:
        return self.pi_mass <= self.volume_bound * (1 + 1e-12)


def chain_from_arrays(
    P: Sequence[Sequence[float]],
    pi: Sequence[float],
    states: Optional[Sequence[Hashable]] = None,
    reversible: bool = True,
) -> FiniteChain:
    labels = list(states) if states is not None else list(range(len(pi)))
    return FiniteChain(labels, np.array(P, dtype=np.float64), np.array(pi, dtype=np.float64), reversible)
