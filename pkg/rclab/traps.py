"""Traps next to box boundaries: the collection C(x), the event A_N(x) and q_N.

A trap at x is a weak bond [x, y] followed by a strong bond [y, z] whose
other bonds are all weak, so a walk that crosses into y tends to bounce
between y and z for about N^alpha steps.
"""
from __future__ import annotations

import itertools
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from rclab import rng
from rclab.environment import Environment, plant, sample_environment
from rclab.exceptions import InvariantError, ParameterError, StorageError
from rclab.kernel import pi
from rclab.lattice import direction_and_sign, inner_boundary
from rclab.models.environment import ConductanceLaw
from rclab.models.lattice import Bond, Box, LatticePoint
from rclab.models.traps import (
    CollectionFrequency,
    JointCheck,
    LambdaReport,
    TrapHit,
    TrapPattern,
    TrapScanReport,
)
from rclab.models.walker import Trajectory
from rclab.walker import directions, hitting_times

logger = logging.getLogger(__name__)

DEFAULT_XI = 0.5
LAMBDA_BATCH = 1024
RANK_PERMUTATIONS = 999
COLLECTION_CHUNK = 1 << 18
# two-sided tail mass of a 3 sigma band
_THREE_SIGMA_TAIL = 2 * stats.norm.sf(3.0)


def collection_C(x: LatticePoint, d: Optional[int] = None) -> TrapPattern:
    if d is not None and d != x.d:
        raise ParameterError(f"Point of dimension {x.d} passed with d={d}.")
    axis, eps = direction_and_sign(x)
    y = x.shifted(axis, eps)
    z = x.shifted(axis, 2 * eps)
    weak = Bond(x, y)
    strong = Bond(y, z)
    others: List[Bond] = []
    for p in (y, z):
        for q in p.neighbors():
            b = Bond(p, q)
            if b not in (weak, strong) and b not in others:
                others.append(b)
    return TrapPattern(x, y, z, axis, eps, weak, strong, tuple(others))


def scan_radius(N: int) -> int:
    """Stored radius that holds C(x) for every x on the inner boundary of B_N.

    x sits on the 3N shell and z two steps further out; the other bonds of z
    reach one step beyond that.
    """
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}.")
    return 3 * N + 3


def default_alpha(d: int, gamma: float, epsilon: float) -> float:
    """alpha = (1 - eps) / ((4d - 2) gamma)."""
    _check_ranges(d, gamma, 0.5, epsilon)
    return (1 - epsilon) / ((4 * d - 2) * gamma)


def is_trap(
    env: Environment, x: LatticePoint, N: int, alpha: float, xi: float = DEFAULT_XI,
) -> Tuple[bool, TrapPattern]:
    pattern = collection_C(x)
    return pattern.classify(env.conductance, N, alpha, xi).is_trap, pattern


def q_n(d: int, gamma: float, xi: float, alpha: float, N: int) -> float:
    """Q(A_N(x)) under the exact power law, for any alpha > 0."""
    _check_ranges(d, gamma, xi, 0.5)
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}.")
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}.")
    law = ConductanceLaw.poly_tail(gamma)
    level = float(N) ** (-alpha)
    weak = law.cdf(level) - law.cdf(level / 2)
    strong = 1 - law.cdf(xi)
    return weak * strong * law.cdf(level) ** (4 * d - 3)


def q_N_closed_form(d: int, gamma: float, xi: float, epsilon: float, N: int) -> float:
    """(1 - 2^-gamma)(1 - xi^gamma) N^-(1 - eps)."""
    _check_ranges(d, gamma, xi, epsilon)
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}.")
    return (1 - 2 ** (-gamma)) * (1 - xi ** gamma) * float(N) ** (-(1 - epsilon))


def scan_traps(
    env: Environment,
    N: int,
    alpha: float,
    xi: float = DEFAULT_XI,
    region: Optional[Iterable[LatticePoint]] = None,
) -> TrapScanReport:
    """All traps with x in ``region`` (default: the inner boundary of B_N)."""
    if region is None and env.radius < scan_radius(N):
        raise StorageError(
            f"Scanning the boundary of B_{N} needs a stored radius of {scan_radius(N)}, it is {env.radius}."
        )
    sites = sorted(region) if region is not None else sorted(inner_boundary(Box(N, env.d)))
    report = TrapScanReport(N, alpha, xi, sites_scanned=len(sites))
    crossing_floor = 1.0 / (4 * env.d * float(N) ** alpha)
    for x in sites:
        pattern = collection_C(x)
        cond = pattern.classify(env.conductance, N, alpha, xi)
        if not cond.is_trap:
            continue
        crossing = cond.omega_xy / pi(env, x)
        if crossing < crossing_floor * (1 - 1e-12):
            raise InvariantError(
                f"Crossing probability {crossing:.6g} at {x.coords} is below "
                f"1/(4dN^alpha) = {crossing_floor:.6g}."
            )
        report.hits.append(
            TrapHit(x, pattern, cond.omega_xy, cond.omega_yz, cond.max_other, crossing)
        )
    logger.info("Scanned %d sites, %d traps (N=%d, alpha=%.4g)", len(sites), len(report.hits), N, alpha)
    return report


def plant_trap(
    env: Environment, x: LatticePoint, N: int, alpha: float, xi: float = DEFAULT_XI,
) -> Environment:
    """A copy of ``env`` in which C(x) forms a trap."""
    pattern = collection_C(x)
    level = float(N) ** (-alpha)
    overrides = {pattern.weak_bond: 0.75 * level, pattern.strong_bond: 1.0}
    for b in pattern.other_bonds:
        overrides[b] = min(env.conductance(b), 0.5 * level)
    return plant(env, overrides)


def collection_frequency(
    d: int,
    gamma: float,
    xi: float,
    alpha: float,
    N: int,
    samples: int,
    seed: int,
) -> CollectionFrequency:
    """Fraction of i.i.d. collections of 4d-1 bonds that form a trap."""
    if samples < 1:
        raise ParameterError("At least one sample is needed.")
    width = 4 * d - 1
    level = float(N) ** (-alpha)
    hits = 0
    for start in range(0, samples, COLLECTION_CHUNK):
        count = min(COLLECTION_CHUNK, samples - start)
        u = rng.uniforms(seed, rng.STREAM_COLLECTIONS, start * width, count * width)
        omega = (u ** (1.0 / gamma)).reshape(count, width)
        ok = (omega[:, 0] > 0.5 * level) & (omega[:, 0] <= level) & (omega[:, 1] >= xi)
        ok &= np.all(omega[:, 2:] <= level, axis=1)
        hits += int(ok.sum())
    return CollectionFrequency(hits, samples, q_n(d, gamma, xi, alpha, N))


def first_trap_rank(
    env: Environment,
    traj: Trajectory,
    N: int,
    alpha: float,
    xi: float = DEFAULT_XI,
) -> Optional[int]:
    """Smallest k < N with a trap at X_{H_k}, or None."""
    for record in hitting_times(traj, N - 1).records:
        if is_trap(env, record.location, N, alpha, xi)[0]:
            return record.N
    return None


def sampled_trap_rank(
    env: Environment,
    N: int,
    alpha: float,
    xi: float = DEFAULT_XI,
    seed: int = 0,
) -> Tuple[Optional[int], Optional[LatticePoint]]:
    """Rank of the first boundary hit that lands on a trap, with the trap site."""
    if env.radius < 3 * N:
        raise StorageError(
            f"Traps next to the boundary of B_{N - 1} need a stored radius of {3 * N}, "
            f"it is {env.radius}."
        )
    for k, x in enumerate(_boundary_hits([env], N, seed)[0]):
        if is_trap(env, x, N, alpha, xi)[0]:
            return k, x
    return None, None


def _boundary_hits(
    envs: Sequence[Environment], N: int, seed: int,
) -> List[List[LatticePoint]]:
    """Hit locations X_{H_0}, ..., X_{H_{N-1}}, one walker per environment."""
    d = envs[0].d
    cdf = np.stack([e.step_cdf for e in envs])
    radius = envs[0].radius
    size = len(envs)
    moves = directions(d)
    gen = rng.generator(seed, rng.STREAM_WALK)
    pos = np.zeros((size, d), dtype=np.int64)
    level = np.zeros(size, dtype=np.int64)
    hits: List[List[LatticePoint]] = [[LatticePoint.origin(d)] for _ in range(size)]
    active = np.arange(size) if N > 1 else np.arange(0)
    while active.size:
        u = 1.0 - gen.random(size)
        idx = (active,) + tuple((pos[active] + radius).T)
        choice = (u[active, None] > cdf[idx][:, :-1]).sum(axis=1)
        pos[active] += moves[choice]
        reach = np.abs(pos[active]).max(axis=1)
        reached = reach == 3 * (level[active] + 1)
        for r in active[reached]:
            level[r] += 1
            hits[r].append(LatticePoint(tuple(int(c) for c in pos[r])))
        active = active[level[active] < N - 1]
    return hits


def lambda_experiment(
    d: int,
    gamma: float,
    xi: float,
    epsilon: float,
    N: int,
    replicas: int,
    seed: int,
    *,
    alpha: Optional[float] = None,
    threads: int = 1,
) -> LambdaReport:
    """Annealed frequencies of traps at the successive boundary hits X_{H_k}.

    Every replica draws its own environment on [-(3N+1), 3N+1]^d from the
    seed derived for its index, and one walk on it.
    """
    if replicas < 1:
        raise ParameterError("At least one replica is needed.")
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}.")
    a = alpha if alpha is not None else default_alpha(d, gamma, epsilon)
    q = q_n(d, gamma, xi, a, N)
    law = ConductanceLaw.poly_tail(gamma)
    radius = 3 * N + 1
    indicators = np.zeros((replicas, N), dtype=bool)
    for b, offset in enumerate(range(0, replicas, LAMBDA_BATCH)):
        size = min(LAMBDA_BATCH, replicas - offset)
        envs = [
            sample_environment(d, radius, law, rng.derive_seed(seed, offset + r), threads=threads)
            for r in range(size)
        ]
        hits = _boundary_hits(envs, N, rng.derive_seed(seed, 1 << 32, b))
        for r, (env, locations) in enumerate(zip(envs, hits)):
            for k, x in enumerate(locations):
                indicators[offset + r, k] = is_trap(env, x, N, a, xi)[0]
        logger.debug("lambda_experiment: %d/%d replicas done", offset + size, replicas)

    R = float(replicas)
    marginals = indicators.mean(axis=0)
    sigma_m = math.sqrt(q * (1 - q) / R)
    pair_ranks = list(itertools.combinations(range(N), 2))
    triple_ranks = list(itertools.combinations(range(N), 3))
    tests = max(1, len(pair_ranks) + len(triple_ranks))
    z = float(stats.norm.isf(_THREE_SIGMA_TAIL / (2 * tests)))

    def joint_check(ranks: Tuple[int, ...]) -> JointCheck:
        joint = float(np.all(indicators[:, list(ranks)], axis=1).mean())
        product = float(np.prod(marginals[list(ranks)]))
        p = q ** len(ranks)
        # spread of the joint frequency plus that of the product of marginals
        sigma = math.sqrt(p * (1 - p) / R) + len(ranks) * q ** (len(ranks) - 1) * sigma_m
        return JointCheck(ranks, joint, product, sigma, z)

    rank_p = _rank_permutation_p(indicators, rng.derive_seed(seed, 1 << 33))
    no_trap = float((~indicators.any(axis=1)).mean())
    expected = (1 - q) ** N
    c = (1 - 2 ** (-gamma)) * (1 - xi ** gamma)
    return LambdaReport(
        d=d,
        gamma=gamma,
        xi=xi,
        epsilon=epsilon,
        alpha=a,
        N=N,
        replicas=replicas,
        seed=seed,
        q_n=q,
        marginals=[float(m) for m in marginals],
        marginal_sigma=sigma_m,
        pairs=[joint_check(r) for r in pair_ranks],
        triples=[joint_check(r) for r in triple_ranks],
        no_trap_frequency=no_trap,
        no_trap_expected=expected,
        no_trap_sigma=math.sqrt(expected * (1 - expected) / R),
        no_trap_bound=math.exp(-c * float(N) ** epsilon),
        rank_p_value=rank_p,
    )


def _rank_permutation_p(indicators: np.ndarray, seed: int) -> float:
    """p-value for equal trap frequencies across ranks k.

    Ranks are shuffled within each replica; the statistic is the spread of
    the per-rank trap counts.
    """
    if indicators.shape[1] < 2:
        return 1.0
    gen = rng.generator(seed, rng.STREAM_BOOTSTRAP)
    observed = float(indicators.sum(axis=0).var())
    exceed = 0
    for _ in range(RANK_PERMUTATIONS):
        spread = float(gen.permuted(indicators, axis=1).sum(axis=0).var())
        exceed += spread >= observed - 1e-9
    return (1 + exceed) / (1 + RANK_PERMUTATIONS)


def _check_ranges(d: int, gamma: float, xi: float, epsilon: float) -> None:
    if d < 1:
        raise ParameterError(f"Dimension must be at least 1, got d={d}.")
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}.")
    if not 0 < xi < 1:
        raise ParameterError(f"xi must lie in (0, 1), got {xi}.")
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}.")
