from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict

from rclab.analysis import gap_shrinkage_p, min_conductance_study
from rclab.commands.base import BaseCommand
from rclab.environment import (
    describe,
    min_conductance_event,
    min_conductance_statistic,
    save,
)
from rclab.exceptions import ConfigError
from rclab.formatters import BaseFormatter, formatter_for

DEFAULT_STAT_REPLICAS = 20


class EnvSampleCommand(BaseCommand):
    """Sample an environment and store it in the binary format."""

    name = "env sample"

    def execute(self) -> int:
        out = self.config.out
        if out is None:
            raise ConfigError("'env sample' needs --out for the environment file.")
        path = Path(out)
        self._check_writable(path)
        env = self._environment()
        save(env, path)
        self._log(f"Saved {env!r} to {path}")
        document = {"provenance": self._provenance({"law": env.law.to_dict()}), "result": dict(describe(env))}
        # the file holds the environment, so the summary goes to stdout
        self.stdout.write(_summary_formatter(self.config.output_format).render(document))
        return 0

    def compute(self) -> Dict[str, Any]:
        return self._document(dict(describe(self._environment())))


class EnvStatCommand(BaseCommand):
    """Minimum-conductance statistic of one stored environment, or averaged over seeds."""

    name = "env stat"

    def compute(self) -> Dict[str, Any]:
        if self.config.has("in"):
            env = self._environment()
            result: Dict[str, Any] = dict(describe(env))
            if self.config.has("N"):
                N = self.config.require("N")
                result["N"] = N
                result["statistic"] = min_conductance_statistic(env, N)
                if self.config.has("mu"):
                    result["min_conductance_event"] = min_conductance_event(
                        env, N, self.config.require("mu"), self.config.get("gamma"),
                    )
            return self._document(result, law=env.law.to_dict())

        law = self._law()
        Ns = self.config.get("grid") or [self.config.require("N")]
        replicas = self.config.get("replicas", DEFAULT_STAT_REPLICAS)
        rows = min_conductance_study(
            self.config.require("d"),
            law,
            Ns,
            replicas,
            self.config.get("seed", 0),
            threads=self.config.get("threads", 1),
        )
        summary: Dict[str, Any] = {"d": self.config.require("d"), "target": rows[0].target, "replicas": replicas}
        if len(set(Ns)) > 1 and replicas > 1 and math.isfinite(rows[0].target):
            summary["gap_shrinkage_p"] = gap_shrinkage_p(rows)
        return self._document(
            summary,
            [{"N": r.N, "mean": r.mean, "sem": r.sem, "target": r.target} for r in rows],
            law=law.to_dict(),
            grid=list(Ns),
        )


def _summary_formatter(fmt: str) -> BaseFormatter:
    return formatter_for("json" if fmt == "gnuplot" else fmt)
