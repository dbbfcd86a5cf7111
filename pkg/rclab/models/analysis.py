from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

VERDICT_INSIDE = "inside"
VERDICT_BELOW = "below"
VERDICT_ABOVE = "above"


@dataclass(frozen=True)
class DecayFit:
    """Least-squares slope of log P^{2n}(0,0) against log n."""
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    n_min: int
    n_max: int
    residual: float
    points: int

    @property
    def ci(self) -> Tuple[float, float]:
        return self.ci_low, self.ci_high

    @property
    def n_range(self) -> Tuple[int, int]:
        return self.n_min, self.n_max

    def verdict(self, low: float, high: float) -> str:
        """Where the confidence interval sits relative to [low, high]."""
        if self.ci_high < low:
            return VERDICT_BELOW
        if self.ci_low > high:
            return VERDICT_ABOVE
        return VERDICT_INSIDE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci": [self.ci_low, self.ci_high],
            "n_range": [self.n_min, self.n_max],
            "residual": self.residual,
            "points": self.points,
        }


@dataclass
class BoundsReport:
    d: int
    gamma: Fraction
    epsilon: Fraction
    mu: Fraction
    window_low: Fraction
    window_high: Fraction
    trans_bound: Fraction
    standard_target: Fraction
    anomalous_delta: Fraction
    standard_delta: Fraction
    fit: Optional[DecayFit] = None
    verdicts: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        def exact(q: Fraction) -> Dict[str, Any]:
            return {"exact": str(q), "value": float(q)}

        return {
            "d": self.d,
            "gamma": exact(self.gamma),
            "epsilon": exact(self.epsilon),
            "mu": exact(self.mu),
            "anomalous_window": [exact(self.window_low), exact(self.window_high)],
            "trans_bound": exact(self.trans_bound),
            "standard_target": exact(self.standard_target),
            "anomalous_delta": exact(self.anomalous_delta),
            "standard_delta": exact(self.standard_delta),
            "fit": self.fit.to_dict() if self.fit is not None else None,
            "verdicts": dict(self.verdicts),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class AnnealedPoint:
    n: int
    mean: float
    ci_low: float
    ci_high: float
    median: float


@dataclass
class AnnealedSeries:
    """Environment average of P^{2n}(0,0) over independent replicas."""
    d: int
    law: str
    seed: int
    replicas: int
    tau: float
    points: List[AnnealedPoint] = field(default_factory=list)
    lost_mass: List[float] = field(default_factory=list)

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"n": p.n, "mean": p.mean, "ci_low": p.ci_low, "ci_high": p.ci_high, "median": p.median}
            for p in self.points
        ]


@dataclass
class PipelineReport:
    """One environment's replay of the trap lower-bound chain."""
    d: int
    gamma: float
    xi: float
    epsilon: float
    alpha: float
    N: int
    n: int
    box_scale: int
    seed: int
    planted: bool
    trap_rank: Optional[int]
    trap_site: Optional[Tuple[int, ...]]
    return_probability: float
    box_mass: float
    box_size: int
    pi_origin: float
    sandwich_rhs: float
    crossing: Optional[float]
    crossing_floor: float
    sojourn_exact: Optional[float]
    sojourn_bound: float
    assembled_lower: Optional[float]
    no_trap_context: float
    notes: List[str] = field(default_factory=list)

    @property
    def check_sandwich(self) -> bool:
        return self.return_probability >= self.sandwich_rhs * (1 - 1e-12)

    @property
    def check_crossing(self) -> Optional[bool]:
        if self.crossing is None:
            return None
        return self.crossing >= self.crossing_floor * (1 - 1e-12)

    @property
    def check_sojourn(self) -> Optional[bool]:
        if self.sojourn_exact is None:
            return None
        return self.sojourn_exact >= self.sojourn_bound * (1 - 1e-12)

    @property
    def check_assembled(self) -> Optional[bool]:
        if self.assembled_lower is None:
            return None
        return self.box_mass >= self.assembled_lower * (1 - 1e-12)

    @property
    def violations(self) -> List[str]:
        checks = {
            "sandwich": self.check_sandwich,
            "crossing": self.check_crossing,
            "sojourn": self.check_sojourn,
            "assembled": self.check_assembled,
        }
        return [name for name, ok in checks.items() if ok is False]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "gamma": self.gamma,
            "xi": self.xi,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "N": self.N,
            "n": self.n,
            "box_scale": self.box_scale,
            "seed": self.seed,
            "planted": self.planted,
            "trap_rank": self.trap_rank,
            "trap_site": list(self.trap_site) if self.trap_site is not None else None,
            "return_probability": self.return_probability,
            "box_mass": self.box_mass,
            "box_size": self.box_size,
            "pi_origin": self.pi_origin,
            "sandwich_rhs": self.sandwich_rhs,
            "crossing": self.crossing,
            "crossing_floor": self.crossing_floor,
            "sojourn_exact": self.sojourn_exact,
            "sojourn_bound": self.sojourn_bound,
            "assembled_lower": self.assembled_lower,
            "no_trap_context": self.no_trap_context,
            "checks": {
                "sandwich": self.check_sandwich,
                "crossing": self.check_crossing,
                "sojourn": self.check_sojourn,
                "assembled": self.check_assembled,
            },
            "violations": self.violations,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class StandardRegimeReport:
    N: int
    mu: float
    epsilon: float
    alpha: float
    kappa: float
    profile_c: float
    sigma: float
    sigma_analytic: float
    precondition: bool
    n: int
    max_ratio: float
    in_regime: bool

    @property
    def holds(self) -> bool:
        return self.max_ratio <= self.epsilon * (1 + 1e-12)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "mu": self.mu,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "kappa": self.kappa,
            "profile_c": self.profile_c,
            "sigma": self.sigma,
            "sigma_analytic": self.sigma_analytic,
            "precondition": self.precondition,
            "two_step_time": self.n,
            "max_ratio": self.max_ratio,
            "holds": self.holds,
            "in_regime": self.in_regime,
        }


@dataclass(frozen=True)
class MinConductanceRow:
    N: int
    mean: float
    sem: float
    target: float
    samples: int
