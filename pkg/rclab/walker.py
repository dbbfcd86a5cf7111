"""Monte Carlo trajectories of the quenched walk.

Walks are advanced in vectorized batches. A batch run with seed ``s`` draws,
at every step, one uniform per replica from the walk stream of ``s``; large
replica counts are split into batches whose seeds are derived from the
master seed and the batch index, so results do not depend on threading.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from rclab import rng
from rclab.environment import Environment
from rclab.exceptions import ParameterError, StorageError
from rclab.kernel import pi
from rclab.models.lattice import Box, LatticePoint, PlainBox
from rclab.models.traps import TrapPattern
from rclab.models.walker import Estimate, HittingRecord, HittingResult, SojournResult, Trajectory

logger = logging.getLogger(__name__)

BATCH_SIZE = 4096
CONFIDENCE = 0.95

AnyBox = Union[Box, PlainBox]


def directions(d: int) -> np.ndarray:
    """Unit moves in direction order +e0, -e0, +e1, -e1, ..."""
    moves = np.zeros((2 * d, d), dtype=np.int64)
    for axis in range(d):
        moves[2 * axis, axis] = 1
        moves[2 * axis + 1, axis] = -1
    return moves


class BatchWalker:
    """Advances many walkers on one environment with a shared uniform stream."""

    def __init__(self, env: Environment, starts: np.ndarray, seed: int) -> None:
        starts = np.atleast_2d(np.asarray(starts, dtype=np.int64))
        if starts.shape[1] != env.d:
            raise ParameterError(f"Start points must have {env.d} coordinates.")
        self.env = env
        self.positions = starts.copy()
        self.seed = int(seed)
        self.t = 0
        self._moves = directions(env.d)
        self._gen = rng.generator(seed, rng.STREAM_WALK)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def advance(self) -> np.ndarray:
        """Move every walker one step; returns the new positions (not a copy)."""
        env = self.env
        u = 1.0 - self._gen.random(self.size)
        reach = np.abs(self.positions).max(axis=1)
        if np.any(reach >= env.radius):
            raise StorageError(
                f"A walker reached sup-norm {int(reach.max())} at step {self.t}; the stored "
                f"box of radius {env.radius} has no bonds beyond it."
            )
        idx = tuple((self.positions + env.radius).T)
        cdf = env.step_cdf[idx]
        choice = (u[:, None] > cdf[:, :-1]).sum(axis=1)
        self.positions += self._moves[choice]
        self.t += 1
        return self.positions


def simulate(env: Environment, start: LatticePoint, length: int, seed: int) -> Trajectory:
    if length < 0:
        raise ParameterError(f"Trajectory length must be non-negative, got {length}.")
    if not env.contains(start):
        raise StorageError(f"Start {start.coords} lies outside the stored box.")
    walker = BatchWalker(env, np.array([start.coords]), seed)
    path = np.empty((length + 1, env.d), dtype=np.int64)
    path[0] = start.coords
    for t in range(1, length + 1):
        path[t] = walker.advance()[0]
    return Trajectory(path, seed)


def simulate_batch(
    env: Environment,
    starts: Sequence[LatticePoint],
    length: int,
    seed: int,
) -> List[Trajectory]:
    """Independent trajectories from several starts, sharing one batch seed."""
    if not starts:
        return []
    walker = BatchWalker(env, np.array([s.coords for s in starts]), seed)
    paths = np.empty((len(starts), length + 1, env.d), dtype=np.int64)
    paths[:, 0] = walker.positions
    for t in range(1, length + 1):
        paths[:, t] = walker.advance()
    return [Trajectory(paths[i], seed) for i in range(len(starts))]


def hitting_times(traj: Trajectory, N_max: int) -> HittingResult:
    """First visits to the inner boundaries of B_1 .. B_{N_max}, with H_0 = 0."""
    result = HittingResult([HittingRecord(0, 0, traj.start)])
    linf = np.abs(traj.positions).max(axis=1)
    for N in range(1, N_max + 1):
        hits = np.nonzero(linf == 3 * N)[0]
        if not hits.size:
            result.truncated = True
            break
        t = int(hits[0])
        result.records.append(HittingRecord(N, t, traj.at(t)))
    return result


def clopper_pearson(
    successes: int, trials: int, confidence: float = CONFIDENCE,
) -> Tuple[float, float]:
    a = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


def _count_batches(
    env: Environment,
    start: LatticePoint,
    replicas: int,
    seed: int,
    run: Callable[[BatchWalker], np.ndarray],
) -> int:
    successes = 0
    for b, offset in enumerate(range(0, replicas, BATCH_SIZE)):
        size = min(BATCH_SIZE, replicas - offset)
        walker = BatchWalker(env, np.tile(start.coords, (size, 1)), rng.derive_seed(seed, b))
        successes += int(run(walker).sum())
    return successes


def exit_probability(
    env: Environment,
    n: int,
    box: AnyBox,
    replicas: int,
    seed: int,
) -> Estimate:
    """P_0(X_n in box) by Monte Carlo, with a Clopper-Pearson interval."""
    if replicas < 1:
        raise ParameterError("At least one replica is needed.")
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}.")
    h = box.half_width

    def run(walker: BatchWalker) -> np.ndarray:
        for _ in range(n):
            walker.advance()
        return np.abs(walker.positions).max(axis=1) <= h

    origin = LatticePoint.origin(env.d)
    successes = _count_batches(env, origin, replicas, seed, run)
    lo, hi = clopper_pearson(successes, replicas)
    logger.info("exit_probability: %d/%d inside half-width %d at n=%d", successes, replicas, h, n)
    return Estimate(
        op="exit_probability",
        params={"n": n, "half_width": h, "d": env.d},
        estimate=successes / replicas,
        ci_low=lo,
        ci_high=hi,
        replicas=replicas,
        seed=seed,
    )


def sojourn_exact(env: Environment, trap: TrapPattern, n: int) -> Tuple[float, float, float]:
    """Exact probability to alternate on {y, z} for n steps from y.

    Returns (probability, p_y, p_z) where p_y and p_z are the one-step
    probabilities of crossing the strong bond from y and from z.
    """
    w = env.conductance(trap.strong_bond)
    p_y = w / pi(env, trap.y)
    p_z = w / pi(env, trap.z)
    return p_y ** math.ceil(n / 2) * p_z ** (n // 2), p_y, p_z


def per_jump_bound(d: int, N: int, alpha: float, xi: float, n: int) -> float:
    """(xi / (xi + (2d-1) N^-alpha))^n."""
    return (xi / (xi + (2 * d - 1) * float(N) ** (-alpha))) ** n


def trap_sojourn(
    env: Environment,
    trap: TrapPattern,
    n: int,
    replicas: int,
    seed: int,
    *,
    N: Optional[int] = None,
    alpha: Optional[float] = None,
    xi: Optional[float] = None,
) -> SojournResult:
    """Probability that the walk from y stays on {y, z} for n steps.

    When N, alpha and xi are given the pattern must be a trap for them, and
    the per-jump lower bound is reported too.
    """
    if replicas < 1:
        raise ParameterError("At least one replica is needed.")
    if trap.d != env.d or not all(env.is_interior(p) for p in (trap.y, trap.z)):
        raise ParameterError("Trap pattern does not fit the environment.")
    bound = None
    if N is not None and alpha is not None and xi is not None:
        if not trap.classify(env.conductance, N, alpha, xi).is_trap:
            raise ParameterError(f"The collection at {trap.x.coords} is not a trap in this environment.")
        bound = per_jump_bound(env.d, N, alpha, xi, n)
    exact, p_y, p_z = sojourn_exact(env, trap, n)

    y = np.array(trap.y.coords)
    z = np.array(trap.z.coords)

    def run(walker: BatchWalker) -> np.ndarray:
        alive = np.ones(walker.size, dtype=bool)
        for t in range(1, n + 1):
            target = z if t % 2 else y
            alive &= np.all(walker.advance() == target, axis=1)
            if not alive.any():
                break
            walker.positions[~alive] = target
        return alive

    successes = _count_batches(env, trap.y, replicas, seed, run)
    lo, hi = clopper_pearson(successes, replicas)
    estimate = Estimate(
        op="trap_sojourn",
        params={"n": n, "x": list(trap.x.coords)},
        estimate=successes / replicas,
        ci_low=lo,
        ci_high=hi,
        replicas=replicas,
        seed=seed,
    )
    return SojournResult(estimate, exact, p_y, p_z, bound)


def step_frequencies(env: Environment, x: LatticePoint, samples: int, seed: int) -> Dict[LatticePoint, int]:
    """Counts of first steps from ``x`` over many independent walkers."""
    counts: Dict[LatticePoint, int] = {y: 0 for y in x.neighbors()}
    moves = directions(env.d)
    for b, offset in enumerate(range(0, samples, BATCH_SIZE)):
        size = min(BATCH_SIZE, samples - offset)
        walker = BatchWalker(env, np.tile(x.coords, (size, 1)), rng.derive_seed(seed, b))
        delta = walker.advance() - np.array(x.coords)
        for k, move in enumerate(moves):
            counts[x.shifted(k // 2, 1 if k % 2 == 0 else -1)] += int(np.all(delta == move, axis=1).sum())
    return counts
