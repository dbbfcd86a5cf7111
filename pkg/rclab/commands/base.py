from __future__ import annotations

import logging
import sys
from abc import ABC, abstractmethod
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

from rclab import __version__, rng
from rclab.environment import Environment, load, sample_environment
from rclab.exceptions import ConfigError, OutputError
from rclab.formatters import formatter_for
from rclab.models.config import ExperimentConfig
from rclab.models.environment import ConductanceLaw
from rclab.models.lattice import LatticePoint

logger = logging.getLogger(__name__)


class BaseCommand(ABC):
    """One CLI action: resolves its inputs, computes, and emits a document."""

    name: str = ""

    def __init__(
        self,
        config: ExperimentConfig,
        *,
        force: bool = False,
        timestamp: bool = True,
        stdout: Optional[TextIO] = None,
    ) -> None:
        self.config = config
        self.force = force
        self.timestamp = timestamp
        self.stdout = stdout if stdout is not None else sys.stdout

    @abstractmethod
    def compute(self) -> Dict[str, Any]:
        """Return the document body: ``result`` and optionally ``rows``."""
        ...

    def execute(self) -> int:
        body = self.compute()
        document = {"provenance": self._provenance(body.pop("provenance_extra", {})), **body}
        self._emit(document)
        return 0

    def _log(self, message: str) -> None:
        logger.info(message)

    def _provenance(self, extra: Dict[str, Any]) -> Dict[str, Any]:
        prov: Dict[str, Any] = {
            "command": self.name,
            "config": self.config.as_dict(),
            "version": __version__,
            "generator": rng.GENERATOR_NAME,
        }
        prov.update(extra)
        if self.timestamp:
            prov["timestamp"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return prov

    def _emit(self, document: Dict[str, Any]) -> None:
        formatter = formatter_for(self.config.output_format)
        out = self.config.out
        if out is None:
            self.stdout.write(formatter.render(document))
            return
        path = Path(out)
        self._check_writable(path)
        formatter.write(document, path)
        self._log(f"Wrote {path}")

    def _check_writable(self, path: Path) -> None:
        if path.exists() and not self.force:
            raise OutputError(f"{path} exists, pass --force to overwrite it.")

    # shared input resolution

    def _law(self) -> ConductanceLaw:
        return ConductanceLaw.parse(str(self.config.get("law", "polytail")), self.config.get("gamma"))

    def _environment(self, radius: Optional[int] = None) -> Environment:
        """The environment named by --in, or one sampled from d, law and seed."""
        if self.config.has("in"):
            env = load(self.config.require("in"))
            self._log(f"Loaded {env!r}")
            return env
        r = radius if radius is not None else self.config.require("radius")
        return sample_environment(
            self.config.require("d"),
            r,
            self._law(),
            self.config.get("seed", 0),
            threads=self.config.get("threads", 1),
        )

    def _point(self, key: str, d: int) -> LatticePoint:
        raw = self.config.get(key)
        if raw is None:
            return LatticePoint.origin(d)
        try:
            coords = tuple(int(c) for c in str(raw).split(","))
        except ValueError as exc:
            raise ConfigError(f"--{key} must be comma-separated integers, got {raw!r}.") from exc
        if len(coords) != d:
            raise ConfigError(f"--{key} needs {d} coordinates, got {len(coords)}.")
        return LatticePoint(coords)

    def _point_reach(self, key: str) -> int:
        """Sup-norm of a point flag before the dimension is known; 0 when unset."""
        raw = self.config.get(key)
        if raw is None:
            return 0
        try:
            return max(abs(int(c)) for c in str(raw).split(","))
        except ValueError as exc:
            raise ConfigError(f"--{key} must be comma-separated integers, got {raw!r}.") from exc

    @staticmethod
    def _document(result: Dict[str, Any], rows: Optional[List[Dict[str, Any]]] = None,
                  **provenance: Any) -> Dict[str, Any]:
        body: Dict[str, Any] = {"result": result}
        if rows is not None:
            body["rows"] = rows
        if provenance:
            body["provenance_extra"] = provenance
        return body
