from __future__ import annotations

from typing import Any, Dict, Optional

from rclab.commands.base import BaseCommand
from rclab.exceptions import ConfigError
from rclab.traps import (
    DEFAULT_XI,
    collection_frequency,
    default_alpha,
    lambda_experiment,
    q_N_closed_form,
    q_n,
    scan_radius,
    scan_traps,
)


class _TrapCommand(BaseCommand):

    def _alpha(self, d: int, gamma: Optional[float]) -> float:
        if self.config.has("alpha"):
            return float(self.config.require("alpha"))
        if gamma is None:
            raise ConfigError(f"'{self.name}' needs --gamma or --alpha for a field without a law.")
        return default_alpha(d, gamma, self.config.require("epsilon"))


class TrapsScanCommand(_TrapCommand):
    """All traps next to the inner boundary of B_N in one environment."""

    name = "traps scan"

    def compute(self) -> Dict[str, Any]:
        N = self.config.require("N")
        env = self._environment(radius=self.config.get("radius", scan_radius(N)))
        alpha = self._alpha(env.d, self.config.get("gamma", env.law.gamma))
        xi = self.config.get("xi", DEFAULT_XI)
        report = scan_traps(env, N, alpha, xi)
        rows = [{**hit.row(), "crossing": hit.crossing} for hit in report.hits]
        result = {
            "N": N,
            "alpha": alpha,
            "xi": xi,
            "sites_scanned": report.sites_scanned,
            "traps": len(report.hits),
        }
        return self._document(result, rows, law=env.law.to_dict())


class TrapsQnCommand(_TrapCommand):
    """q_N in closed form, optionally against a Monte Carlo frequency."""

    name = "traps qn"

    def compute(self) -> Dict[str, Any]:
        d = self.config.require("d")
        gamma = self.config.require("gamma")
        xi = self.config.get("xi", DEFAULT_XI)
        N = self.config.require("N")
        alpha = self._alpha(d, gamma)
        result: Dict[str, Any] = {"alpha": alpha, "q_n": q_n(d, gamma, xi, alpha, N)}
        if self.config.has("epsilon") and not self.config.has("alpha"):
            result["q_closed_form"] = q_N_closed_form(d, gamma, xi, self.config.require("epsilon"), N)
        if self.config.has("samples"):
            freq = collection_frequency(
                d, gamma, xi, alpha, N, self.config.require("samples"), self.config.get("seed", 0),
            )
            result.update(
                samples=freq.samples,
                hits=freq.hits,
                frequency=freq.frequency,
                sigma=freq.sigma,
                within_3_sigma=freq.within_3_sigma,
            )
        return self._document(result)


class TrapsLambdaCommand(_TrapCommand):
    """Joint trap frequencies along the walk, against independence."""

    name = "traps lambda"

    def compute(self) -> Dict[str, Any]:
        report = lambda_experiment(
            self.config.require("d"),
            self.config.require("gamma"),
            self.config.get("xi", DEFAULT_XI),
            self.config.require("epsilon"),
            self.config.require("N"),
            self.config.require("replicas"),
            self.config.get("seed", 0),
            alpha=self.config.get("alpha"),
            threads=self.config.get("threads", 1),
        )
        rows = [
            {"ranks": " ".join(str(r) for r in c.ranks), "joint": c.joint, "product": c.product,
             "sigma": c.sigma, "passes": c.passes}
            for c in report.pairs + report.triples
        ]
        return self._document(report.to_dict(), rows)
