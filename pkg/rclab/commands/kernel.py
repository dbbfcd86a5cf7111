from __future__ import annotations

from typing import Any, Dict

from rclab.commands.base import BaseCommand
from rclab.kernel import DEFAULT_TAU, default_grid, heat_kernel, return_series


class KernelReturnCommand(BaseCommand):
    """P^{2n}(0,0) on a geometric grid, ready for ``fit exponent``."""

    name = "kernel return"

    def compute(self) -> Dict[str, Any]:
        n_max = self.config.require("n_max")
        tau = self.config.get("tau", DEFAULT_TAU)
        env = self._environment(radius=self.config.get("radius", 2 * n_max + 2))
        grid = self.config.get("grid") or default_grid(n_max)
        series = return_series(env, n_max, grid, tau)
        result = {
            "d": env.d,
            "law": env.law.label(),
            "seed": env.seed,
            "radius": env.radius,
            "points": len(series.points),
            "max_err_bound": max((p.err_bound for p in series.points), default=0.0),
        }
        return self._document(
            result, series.rows(), law=env.law.to_dict(), tau=tau, grid=series.ns(),
        )


class KernelDistCommand(BaseCommand):
    """The full distribution P^n(source, .)."""

    name = "kernel dist"

    def compute(self) -> Dict[str, Any]:
        n = self.config.require("n")
        tau = self.config.get("tau", DEFAULT_TAU)
        env = self._environment(radius=self.config.get("radius", n + 2 + self._point_reach("source")))
        source = self._point("source", env.d)
        dist = heat_kernel(env, n, source, tau)
        rows = [
            {"x": " ".join(str(c) for c in p.coords), "p": value}
            for p, value in dist.items()
        ]
        result = {
            "n": n,
            "source": list(source.coords),
            "total_mass": dist.total_mass(),
            "lost_mass_bound": dist.lost_mass_bound,
            "support_size": dist.support_size(),
            "support_linf": dist.support_linf(),
        }
        return self._document(result, rows, law=env.law.to_dict(), tau=tau)
