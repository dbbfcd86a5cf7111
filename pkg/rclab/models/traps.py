from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

from rclab.models.lattice import Bond, LatticePoint


@dataclass(frozen=True)
class TrapPattern:
    """The collection C(x): weak bond [x,y], strong bond [y,z] and 4d-3 others.

    ``y = x + eps e_axis`` and ``z = x + 2 eps e_axis``; the other bonds are
    all remaining bonds touching y or z.
    """
    x: LatticePoint
    y: LatticePoint
    z: LatticePoint
    axis: int
    eps: int
    weak_bond: Bond
    strong_bond: Bond
    other_bonds: Tuple[Bond, ...]

    @property
    def d(self) -> int:
        return self.x.d

    @property
    def bonds(self) -> Tuple[Bond, ...]:
        return (self.weak_bond, self.strong_bond) + self.other_bonds

    def sites(self) -> Tuple[LatticePoint, ...]:
        """Every endpoint of the collection, sorted."""
        return tuple(sorted({p for b in self.bonds for p in b.endpoints()}))

    def classify(
        self,
        omega: Callable[[Bond], float],
        N: int,
        alpha: float,
        xi: float,
    ) -> TrapConditions:
        level = float(N) ** (-alpha)
        w_xy = omega(self.weak_bond)
        w_yz = omega(self.strong_bond)
        others = [omega(b) for b in self.other_bonds]
        max_other = max(others) if others else 0.0
        return TrapConditions(
            weak=0.5 * level < w_xy <= level,
            strong=w_yz >= xi,
            others=max_other <= level,
            omega_xy=w_xy,
            omega_yz=w_yz,
            max_other=max_other,
        )


@dataclass(frozen=True)
class TrapConditions:
    weak: bool
    strong: bool
    others: bool
    omega_xy: float
    omega_yz: float
    max_other: float

    @property
    def is_trap(self) -> bool:
        return self.weak and self.strong and self.others


@dataclass(frozen=True)
class TrapHit:
    site: LatticePoint
    pattern: TrapPattern
    omega_xy: float
    omega_yz: float
    max_other: float
    crossing: float

    def row(self) -> Dict[str, object]:
        return {
            "site_coords": " ".join(str(c) for c in self.site.coords),
            "omega_xy": self.omega_xy,
            "omega_yz": self.omega_yz,
            "max_other": self.max_other,
        }


@dataclass
class TrapScanReport:
    N: int
    alpha: float
    xi: float
    hits: List[TrapHit] = field(default_factory=list)
    sites_scanned: int = 0

    def sites(self) -> List[LatticePoint]:
        return [h.site for h in self.hits]


@dataclass(frozen=True)
class CollectionFrequency:
    hits: int
    samples: int
    q_closed_form: float

    @property
    def frequency(self) -> float:
        return self.hits / self.samples

    @property
    def sigma(self) -> float:
        q = self.q_closed_form
        return (q * (1 - q) / self.samples) ** 0.5

    @property
    def within_3_sigma(self) -> bool:
        return abs(self.frequency - self.q_closed_form) <= 3 * self.sigma


@dataclass(frozen=True)
class JointCheck:
    ranks: Tuple[int, ...]
    joint: float
    product: float
    sigma: float
    z: float

    @property
    def passes(self) -> bool:
        return abs(self.joint - self.product) <= self.z * self.sigma


@dataclass
class LambdaReport:
    d: int
    gamma: float
    xi: float
    epsilon: float
    alpha: float
    N: int
    replicas: int
    seed: int
    q_n: float
    marginals: List[float] = field(default_factory=list)
    marginal_sigma: float = 0.0
    pairs: List[JointCheck] = field(default_factory=list)
    triples: List[JointCheck] = field(default_factory=list)
    no_trap_frequency: float = 0.0
    no_trap_expected: float = 0.0
    no_trap_sigma: float = 0.0
    no_trap_bound: float = 0.0
    rank_p_value: float = 1.0

    @property
    def marginals_pass(self) -> bool:
        return all(abs(m - self.q_n) <= 3 * self.marginal_sigma for m in self.marginals)

    @property
    def ranks_pass(self) -> bool:
        return self.rank_p_value > 0.001

    @property
    def no_trap_pass(self) -> bool:
        return abs(self.no_trap_frequency - self.no_trap_expected) <= 3 * self.no_trap_sigma

    def to_dict(self) -> Dict[str, object]:
        return {
            "d": self.d,
            "gamma": self.gamma,
            "xi": self.xi,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "N": self.N,
            "replicas": self.replicas,
            "seed": self.seed,
            "q_n": self.q_n,
            "marginals": list(self.marginals),
            "marginal_sigma": self.marginal_sigma,
            "marginals_pass": self.marginals_pass,
            "pairs": [
                {"ranks": list(c.ranks), "joint": c.joint, "product": c.product,
                 "sigma": c.sigma, "z": c.z, "passes": c.passes}
                for c in self.pairs
            ],
            "triples": [
                {"ranks": list(c.ranks), "joint": c.joint, "product": c.product,
                 "sigma": c.sigma, "z": c.z, "passes": c.passes}
                for c in self.triples
            ],
            "no_trap_frequency": self.no_trap_frequency,
            "no_trap_expected": self.no_trap_expected,
            "no_trap_sigma": self.no_trap_sigma,
            "no_trap_pass": self.no_trap_pass,
            "no_trap_bound": self.no_trap_bound,
            "rank_p_value": self.rank_p_value,
            "ranks_pass": self.ranks_pass,
        }
