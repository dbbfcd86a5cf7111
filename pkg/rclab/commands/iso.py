from __future__ import annotations

from typing import Any, Dict, List

from rclab import rng
from rclab.commands.base import BaseCommand
from rclab.environment import modify
from rclab.exceptions import ConfigError
from rclab.isoperimetry import (
    iso_constant_check,
    iso_profile,
    lazy_cycle,
    load_chain,
    random_connected_even_subset,
    random_reversible_chain,
    sampled_profile,
    surface_volume_check,
    verify_mp,
)
from rclab.models.chain import FiniteChain
from rclab.models.lattice import PlainBox

DEFAULT_SUBSETS = 100
DEFAULT_SUBSET_SIZE = 12


class _ChainCommand(BaseCommand):

    def _chain(self) -> FiniteChain:
        """The chain from --chain, a lazy --cycle, or a random one on --states states."""
        if self.config.has("chain"):
            return load_chain(self.config.require("chain"))
        if self.config.has("cycle"):
            return lazy_cycle(self.config.require("cycle"))
        if self.config.has("states"):
            return random_reversible_chain(self.config.require("states"), self.config.get("seed", 0))
        raise ConfigError(f"'{self.name}' needs --chain, --cycle or --states.")


class IsoProfileCommand(_ChainCommand):
    """Isoperimetric profile, exact or sampled."""

    name = "iso profile"

    def compute(self) -> Dict[str, Any]:
        chain = self._chain()
        if self.config.has("samples"):
            profile = sampled_profile(chain, self.config.require("samples"), self.config.get("seed", 0))
        else:
            profile = iso_profile(chain)
        result = {
            "states": chain.size,
            "pi_total": float(chain.pi.sum()),
            "certified": profile.certified,
            "breakpoints": len(profile.breakpoints),
        }
        return self._document(result, profile.rows())


class IsoMpCommand(_ChainCommand):
    """Heat-kernel bound at the profile time threshold, checked pair by pair."""

    name = "iso mp"

    def compute(self) -> Dict[str, Any]:
        chain = self._chain()
        report = verify_mp(chain, self.config.require("epsilon"), sigma=self.config.get("sigma"))
        rows = [
            {"x": c.x, "y": c.y, "n": c.n, "value": c.value, "bound": c.bound,
             "informative": c.informative, "holds": c.holds}
            for c in report.checks
        ]
        result = {
            "states": chain.size,
            "epsilon": report.epsilon,
            "sigma": report.sigma,
            "checks": len(report.checks),
            "violations": len(report.violations),
            "notes": [report.note],
        }
        return self._document(result, rows)


class IsoCheckCommand(BaseCommand):
    """Surface and volume bounds over random connected even sets."""

    name = "iso check"

    def compute(self) -> Dict[str, Any]:
        N = self.config.require("N")
        mu = self.config.require("mu")
        seed = self.config.get("seed", 0)
        env = self._environment(radius=self.config.get("radius", N + 3))
        modenv = modify(env, N)
        window = PlainBox(N + 1, env.d)
        size = self.config.get("size", DEFAULT_SUBSET_SIZE)
        count = self.config.get("replicas", DEFAULT_SUBSETS)

        if count < 1:
            raise ConfigError("'iso check' needs at least one subset (--replicas).")
        rows: List[Dict[str, Any]] = []
        reports = []
        for r in range(count):
            subset = random_connected_even_subset(window, size, rng.derive_seed(seed, r))
            report = surface_volume_check(
                modenv, N, mu, subset, gamma=self.config.get("gamma"), alpha=self.config.get("alpha"),
            )
            reports.append(report)
            rows.append({
                "subset": r,
                "size": report.size,
                "boundary_edges": report.boundary_edges,
                "edge_measure": report.edge_measure,
                "surface_bound": report.surface_bound,
                "pi_mass": report.pi_mass,
                "volume_bound": report.volume_bound,
                "surface_holds": report.surface_holds,
                "volume_holds": report.volume_holds,
            })
        boxes = [list(PlainBox(h, env.d).points()) for h in range(1, N + 1)]
        result = {
            "N": N,
            "mu": mu,
            "alpha": reports[0].alpha,
            "precondition": reports[0].precondition,
            "subsets": count,
            "surface_violations": sum(not row["surface_holds"] for row in rows),
            "volume_violations": sum(not row["volume_holds"] for row in rows),
            "box_iso_constant": iso_constant_check(env.d, boxes),
        }
        return self._document(result, rows, law=env.law.to_dict())

