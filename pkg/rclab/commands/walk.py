from __future__ import annotations

from typing import Any, Dict

from rclab.commands.base import BaseCommand
from rclab.walker import hitting_times, simulate


class WalkSimulateCommand(BaseCommand):
    """One quenched trajectory and its hitting times of the 3N-scaled boxes."""

    name = "walk simulate"

    def compute(self) -> Dict[str, Any]:
        length = self.config.require("length")
        env = self._environment(radius=self.config.get("radius", length + 1 + self._point_reach("source")))
        start = self._point("source", env.d)
        seed = self.config.get("seed", 0)
        traj = simulate(env, start, length, seed)
        N_max = self.config.get("N", max(1, env.radius // 3))
        hits = hitting_times(traj, N_max)
        rows = [
            {"t": t, "x": " ".join(str(int(c)) for c in row)}
            for t, row in enumerate(traj.positions)
        ]
        result = {
            "length": traj.length,
            "start": list(start.coords),
            "end": list(traj.at(traj.length).coords),
            "hitting_times": {str(r.N): r.time for r in hits.records},
            "hitting_truncated": hits.truncated,
        }
        return self._document(result, rows, law=env.law.to_dict())
