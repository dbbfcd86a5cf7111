from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

from rclab.exceptions import ParameterError

LAW_POLY_TAIL = "polytail"
LAW_SITE_MIN = "sitemin"
LAW_CONSTANT = "constant"
LAW_FIELD = "field"

LAW_TAGS: Dict[str, int] = {
    LAW_POLY_TAIL: 0,
    LAW_SITE_MIN: 1,
    LAW_CONSTANT: 2,
    LAW_FIELD: 3,
}

_LABELS: Dict[str, str] = {
    LAW_POLY_TAIL: "PolyTail",
    LAW_SITE_MIN: "SiteMin",
    LAW_CONSTANT: "Constant",
    LAW_FIELD: "Field",
}


@dataclass(frozen=True)
class ConductanceLaw:
    """Bond law: exact power tail a^gamma, two-site minimum, or a constant.

    ``field`` marks environments whose values were set explicitly (planted
    fixtures); they are not reproducible from a seed alone.
    """
    kind: str
    parameter: float

    def __post_init__(self) -> None:
        if self.kind not in LAW_TAGS:
            raise ParameterError(
                f"Unknown conductance law '{self.kind}'. "
                f"Expected one of: {', '.join(sorted(LAW_TAGS))}."
            )
        if self.kind in (LAW_POLY_TAIL, LAW_SITE_MIN) and not self.parameter > 0:
            raise ParameterError(f"gamma must be positive, got {self.parameter}.")
        if self.kind == LAW_CONSTANT and not 0 < self.parameter <= 1:
            raise ParameterError(
                f"Constant conductance must lie in (0, 1], got {self.parameter}."
            )

    @classmethod
    def poly_tail(cls, gamma: float) -> ConductanceLaw:
        return cls(LAW_POLY_TAIL, float(gamma))

    @classmethod
    def site_min(cls, gamma: float) -> ConductanceLaw:
        return cls(LAW_SITE_MIN, float(gamma))

    @classmethod
    def constant(cls, c: float = 1.0) -> ConductanceLaw:
        return cls(LAW_CONSTANT, float(c))

    @classmethod
    def field(cls) -> ConductanceLaw:
        return cls(LAW_FIELD, 0.0)

    @classmethod
    def from_tag(cls, tag: int, parameter: float) -> ConductanceLaw:
        for kind, value in LAW_TAGS.items():
            if value == tag:
                return cls(kind, parameter)
        raise ParameterError(f"Unknown law tag {tag}.")

    @classmethod
    def parse(cls, text: str, gamma: Optional[float] = None) -> ConductanceLaw:
        """Parse ``polytail``, ``sitemin:0.5`` or ``constant:1`` style specs."""
        name, _, value = text.strip().lower().partition(":")
        try:
            number = float(value) if value else None
        except ValueError as exc:
            raise ParameterError(f"Cannot parse conductance law '{text}'.") from exc
        if name == LAW_CONSTANT:
            return cls.constant(number if number is not None else 1.0)
        if name in (LAW_POLY_TAIL, LAW_SITE_MIN):
            if number is not None:
                param = number
            elif gamma is not None:
                param = float(gamma)
            else:
                raise ParameterError(f"Law '{name}' needs a gamma value.")
            return cls(name, param)
        raise ParameterError(f"Cannot parse conductance law '{text}'.")

    @property
    def tag(self) -> int:
        return LAW_TAGS[self.kind]

    @property
    def gamma(self) -> Optional[float]:
        if self.kind in (LAW_POLY_TAIL, LAW_SITE_MIN):
            return self.parameter
        return None

    def cdf(self, a: float) -> float:
        """Q(omega_b <= a)."""
        if a < 0:
            return 0.0
        if self.kind == LAW_POLY_TAIL:
            return min(1.0, a ** self.parameter)
        if self.kind == LAW_SITE_MIN:
            site = min(1.0, a ** self.parameter)
            return 1.0 - (1.0 - site) ** 2
        if self.kind == LAW_CONSTANT:
            return 1.0 if a >= self.parameter else 0.0
        raise ParameterError("An explicit field has no marginal law.")

    def label(self) -> str:
        if self.kind == LAW_FIELD:
            return _LABELS[self.kind]
        name = "c" if self.kind == LAW_CONSTANT else "gamma"
        return f"{_LABELS[self.kind]}({name}={self.parameter:g})"

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "parameter": self.parameter, "label": self.label()}
