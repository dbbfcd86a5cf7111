from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from rclab.exceptions import ConfigError


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_int_list(value: Any) -> List[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).replace(" ", "").split(",") if v]


def _to_seed(value: Any) -> int:
    seed = int(value)
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed out of range: {seed}")
    return seed


KEY_TYPES: Dict[str, Callable[[Any], Any]] = {
    "d": int,
    "gamma": float,
    "xi": float,
    "epsilon": float,
    "mu": float,
    "N": int,
    "n_max": int,
    "radius": int,
    "tau": float,
    "replicas": int,
    "seed": _to_seed,
    "threads": int,
    "out": str,
    "format": str,
    "law": str,
    "alpha": float,
    "n": int,
    "length": int,
    "nmin": int,
    "nmax": int,
    "in": str,
    "horizon": int,
    "size": int,
    "budget": int,
    "plant": _to_bool,
    "source": str,
    "box_N": int,
    "grid": _to_int_list,
    "samples": int,
    "chain": str,
    "cycle": int,
    "states": int,
    "sigma": float,
    "kappa": float,
}

FORMATS = ("json", "csv", "gnuplot", "markdown")


@dataclass
class ExperimentConfig:
    """Resolved parameters of one command run."""
    command: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.command:
            raise ConfigError("Command cannot be empty.")
        unknown = sorted(k for k in self.params if k not in KEY_TYPES)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}.")
        resolved: Dict[str, Any] = {}
        for key, value in self.params.items():
            if value is None:
                continue
            try:
                resolved[key] = KEY_TYPES[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"Invalid value {value!r} for '{key}'.") from exc
        self.params = resolved
        fmt = self.params.get("format")
        if fmt is not None and fmt not in FORMATS:
            raise ConfigError(f"Unknown format '{fmt}'; choose one of {', '.join(FORMATS)}.")

    def get(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def require(self, key: str) -> Any:
        if key not in self.params:
            raise ConfigError(f"'{self.command}' needs --{key}.")
        return self.params[key]

    def has(self, key: str) -> bool:
        return key in self.params

    @property
    def output_format(self) -> str:
        return str(self.params.get("format", "json"))

    @property
    def out(self) -> Optional[str]:
        value = self.params.get("out")
        return str(value) if value is not None else None

    def as_dict(self) -> Dict[str, Any]:
        return {"command": self.command, **{k: self.params[k] for k in sorted(self.params)}}
