from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from rclab import rng
from rclab.analysis import (
    annealed_as_series,
    annealed_return,
    anomalous_pipeline,
    bounds_report,
    fit_exponent,
    series_from_rows,
    standard_regime_check,
)
from rclab.commands.base import BaseCommand
from rclab.environment import modify, sample_environment
from rclab.exceptions import EnvironmentFileError
from rclab.kernel import DEFAULT_TAU, default_grid
from rclab.models.analysis import DecayFit
from rclab.models.environment import ConductanceLaw
from rclab.models.kernel import ReturnSeries
from rclab.traps import DEFAULT_XI


def read_series(path: Path) -> ReturnSeries:
    """A return series from a JSON document (its ``rows``) or a CSV table.

    CSV lines starting with '#' are provenance and skipped.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise EnvironmentFileError(f"Cannot read series file {path}.") from exc
    rows: List[Mapping[str, object]]
    if path.suffix == ".json" or text.lstrip().startswith(("{", "[")):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise EnvironmentFileError(f"{path.name} is not valid JSON.") from exc
        rows = data.get("rows", []) if isinstance(data, dict) else data
    else:
        body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
        rows = list(csv.DictReader(io.StringIO(body)))
    return series_from_rows(rows)


class _FitCommand(BaseCommand):

    def _fit(self, series: ReturnSeries) -> DecayFit:
        return fit_exponent(
            series, self.config.get("nmin"), self.config.get("nmax"), seed=self.config.get("seed", 0),
        )


class FitExponentCommand(_FitCommand):
    """Log-log slope of a stored return series."""

    name = "fit exponent"

    def compute(self) -> Dict[str, Any]:
        series = read_series(Path(self.config.require("in")))
        fit = self._fit(series)
        return self._document(fit.to_dict(), series.rows())


class ReportBoundsCommand(_FitCommand):
    """The proven exponents in exact arithmetic, with a fitted slope placed among them."""

    name = "report bounds"

    def compute(self) -> Dict[str, Any]:
        fit: Optional[DecayFit] = None
        if self.config.has("in"):
            fit = self._fit(read_series(Path(self.config.require("in"))))
        report = bounds_report(
            fit,
            self.config.require("d"),
            self.config.require("gamma"),
            self.config.get("epsilon", 0),
            self.config.get("mu", 0.01),
        )
        return self._document(report.to_dict())


class AnnealedCommand(_FitCommand):
    """Environment-averaged return probabilities."""

    name = "annealed"

    def compute(self) -> Dict[str, Any]:
        grid = self.config.get("grid") or default_grid(self.config.require("n_max"))
        tau = self.config.get("tau", DEFAULT_TAU)
        law = self._law()
        series = annealed_return(
            self.config.require("d"),
            law,
            grid,
            self.config.require("replicas"),
            self.config.get("seed", 0),
            tau=tau,
            threads=self.config.get("threads", 1),
        )
        rows = [dict(row, lost_mass=lost) for row, lost in zip(series.rows(), series.lost_mass)]
        result: Dict[str, Any] = {
            "d": series.d,
            "law": series.law,
            "replicas": series.replicas,
            "points": len(series.points),
        }
        if self.config.has("nmin") or self.config.has("nmax"):
            result["fit"] = self._fit(annealed_as_series(series, law.gamma)).to_dict()
        result["notes"] = [
            "The annealed mean is measured in discrete time; no equality with a "
            "continuous-time exponent is asserted."
        ]
        return self._document(result, rows, law=law.to_dict(), tau=tau, grid=list(grid))


class PipelineAnomalousCommand(BaseCommand):
    """Trap lower-bound chain replayed on seeded environments."""

    name = "pipeline anomalous"

    def compute(self) -> Dict[str, Any]:
        replicas = self.config.get("replicas", 1)
        seed = self.config.get("seed", 0)
        reports = [
            anomalous_pipeline(
                self.config.require("d"),
                self.config.require("gamma"),
                self.config.get("xi", DEFAULT_XI),
                self.config.require("epsilon"),
                self.config.require("N"),
                rng.derive_seed(seed, r) if replicas > 1 else seed,
                alpha=self.config.get("alpha"),
                plant=self.config.get("plant", False),
                threads=self.config.get("threads", 1),
            )
            for r in range(replicas)
        ]
        rows = [
            {
                "seed": rep.seed,
                "trap_rank": rep.trap_rank,
                "return_probability": rep.return_probability,
                "sandwich_rhs": rep.sandwich_rhs,
                "crossing": rep.crossing,
                "sojourn_exact": rep.sojourn_exact,
                "sojourn_bound": rep.sojourn_bound,
                "violations": " ".join(rep.violations),
            }
            for rep in reports
        ]
        result: Dict[str, Any] = reports[0].to_dict() if replicas == 1 else {
            "replicas": replicas,
            "alpha": reports[0].alpha,
            "n": reports[0].n,
            "box_scale": reports[0].box_scale,
            "violations": sum(len(rep.violations) for rep in reports),
            "traps_found": sum(rep.trap_rank is not None for rep in reports),
        }
        return self._document(result, rows)


class PipelineStandardCommand(BaseCommand):
    """Upper-bound argument of the large-gamma regime on a small window."""

    name = "pipeline standard"

    def compute(self) -> Dict[str, Any]:
        N = self.config.require("N")
        gamma = self.config.require("gamma")
        env = sample_environment(
            self.config.require("d"),
            self.config.get("radius", N + 3),
            ConductanceLaw.parse(str(self.config.get("law", "polytail")), gamma),
            self.config.get("seed", 0),
            threads=self.config.get("threads", 1),
        )
        report = standard_regime_check(
            modify(env, N),
            N,
            self.config.require("mu"),
            self.config.require("epsilon"),
            self.config.get("kappa"),
            gamma=gamma,
            alpha=self.config.get("alpha"),
        )
        return self._document(report.to_dict(), law=env.law.to_dict())
