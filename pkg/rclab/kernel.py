"""Quenched transition operator: exact n-step distributions and return series.

Distributions are propagated on a cropped window that follows the realized
support. Entries that fall below the truncation threshold are dropped and
their mass is added to ``lost_mass_bound``, so every computed value is a
lower bound of the exact one with a certified one-sided error.
"""
from __future__ import annotations

import logging
import math
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from rclab.environment import Environment, ModifiedEnvironment
from rclab.exceptions import BudgetError, ParameterError, StorageError
from rclab.lattice import even_neighbors
from rclab.models.chain import FiniteChain
from rclab.models.kernel import ReturnSeries, SandwichReport, SeriesPoint, SparseDistribution
from rclab.models.lattice import LatticePoint, PlainBox

logger = logging.getLogger(__name__)

DEFAULT_TAU = 1e-14
DEFAULT_MAX_STATES = 3000


def pi(env: Environment, x: LatticePoint) -> float:
    if not env.is_interior(x):
        raise StorageError(
            f"pi({x.coords}) needs all {2 * env.d} bonds, but the site is not "
            f"inside the stored interior (radius {env.radius})."
        )
    return float(env.pi_array[env.array_index(x)])


def transition_row(env: Environment, x: LatticePoint) -> Dict[LatticePoint, float]:
    """P(x, .) as a map over the 2d neighbors."""
    total = pi(env, x)
    idx = env.array_index(x)
    weights = env.directional[idx]
    return {y: float(w) / total for y, w in zip(x.neighbors(), weights)}


def step(env: Environment, dist: SparseDistribution, tau: float = DEFAULT_TAU) -> SparseDistribution:
    """One application of P to ``dist``, then truncation below ``tau``."""
    if dist.d != env.d:
        raise ParameterError(f"Distribution of dimension {dist.d} on a {env.d}-dimensional environment.")
    _check_support(env, dist)
    d = env.d
    shape = dist.values.shape
    region = tuple(
        slice(o + env.radius, o + env.radius + n) for o, n in zip(dist.origin, shape)
    )
    scaled = dist.values * env.inv_pi_array[region]
    weights = env.directional[region]
    out = np.zeros(tuple(n + 2 for n in shape), dtype=np.float64)
    for axis in range(d):
        for k, shift in ((2 * axis, 1), (2 * axis + 1, -1)):
            target = [slice(1, n + 1) for n in shape]
            target[axis] = slice(1 + shift, shape[axis] + 1 + shift)
            out[tuple(target)] += scaled * weights[..., k]
    origin = tuple(o - 1 for o in dist.origin)
    lost = dist.lost_mass_bound
    if tau > 0:
        small = (out > 0) & (out < tau)
        if small.any():
            lost += float(out[small].sum())
            out[small] = 0.0
    origin, out = _crop(origin, out)
    return SparseDistribution(origin, out, lost)


def _check_support(env: Environment, dist: SparseDistribution) -> None:
    reach = dist.support_linf()
    if reach >= env.radius:
        raise StorageError(
            f"Support reaches sup-norm {reach}; the stored box of radius {env.radius} "
            f"has no bonds beyond it. Sample a larger environment."
        )


def _crop(origin: Tuple[int, ...], values: np.ndarray) -> Tuple[Tuple[int, ...], np.ndarray]:
    nz = np.nonzero(values)
    if not nz[0].size:
        return origin, np.zeros((1,) * values.ndim, dtype=np.float64)
    lo = [int(a.min()) for a in nz]
    hi = [int(a.max()) + 1 for a in nz]
    window = tuple(slice(a, b) for a, b in zip(lo, hi))
    return tuple(o + a for o, a in zip(origin, lo)), np.ascontiguousarray(values[window])


def propagate(
    env: Environment,
    source: LatticePoint,
    times: Iterable[int],
    tau: float = DEFAULT_TAU,
) -> Iterator[Tuple[int, SparseDistribution]]:
    """Yield (t, P^t(source, .)) for each requested t in increasing order."""
    wanted = sorted(set(times))
    if wanted and wanted[0] < 0:
        raise ParameterError("Times must be non-negative.")
    if not env.contains(source):
        raise StorageError(f"Source {source.coords} lies outside the stored box.")
    if tau < 0:
        raise ParameterError(f"Truncation threshold must be non-negative, got {tau}.")
    if tau == 0 and wanted and wanted[-1] > env.radius - 1 - source.linf():
        raise StorageError(
            f"n={wanted[-1]} steps from {source.coords} need radius "
            f"{wanted[-1] + 1 + source.linf()}, the stored radius is {env.radius}."
        )
    dist = SparseDistribution.delta(source)
    t = 0
    for target in wanted:
        while t < target:
            dist = step(env, dist, tau)
            t += 1
        yield t, dist


def heat_kernel(
    env: Environment,
    n: int,
    source: Optional[LatticePoint] = None,
    tau: float = DEFAULT_TAU,
) -> SparseDistribution:
    src = source if source is not None else LatticePoint.origin(env.d)
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}.")
    for _, dist in propagate(env, src, [n], tau):
        return dist
    raise AssertionError("unreachable")


def default_grid(n_max: int) -> List[int]:
    """Geometric grid: the distinct values round(2^(k/4)) up to n_max."""
    grid: List[int] = []
    k = 0
    while True:
        n = int(round(2 ** (k / 4)))
        if n > n_max:
            break
        if not grid or grid[-1] != n:
            grid.append(n)
        k += 1
    return grid


def return_series(
    env: Environment,
    n_max: int,
    grid: Optional[Sequence[int]] = None,
    tau: float = DEFAULT_TAU,
) -> ReturnSeries:
    """P^{2n}(0,0) for n on ``grid`` (default: geometric up to n_max)."""
    if n_max < 1:
        raise ParameterError(f"n_max must be at least 1, got {n_max}.")
    ns = sorted(set(grid)) if grid is not None else default_grid(n_max)
    if not ns or ns[0] < 1 or ns[-1] > n_max:
        raise ParameterError(f"Grid points must lie in [1, {n_max}].")
    origin = LatticePoint.origin(env.d)
    series = ReturnSeries(
        d=env.d, gamma=env.law.gamma, seed=env.seed, law=env.law.label(), tau=tau,
    )
    for t, dist in propagate(env, origin, [2 * n for n in ns], tau):
        value = dist.get(origin)
        series.points.append(SeriesPoint(t // 2, value, dist.lost_mass_bound))
        logger.debug("P^%d(0,0) = %.6g (lost <= %.3g)", t, value, dist.lost_mass_bound)
    return series


def spectral_sandwich(
    env: Environment,
    n: int,
    box_radius: int,
    tau: float = DEFAULT_TAU,
) -> SandwichReport:
    """Compare P^{2n}(0,0) with the box-mass lower bound from reversibility."""
    box = PlainBox(box_radius, env.d)
    if box_radius > env.radius - 1:
        raise StorageError(
            f"pi on the box of radius {box_radius} needs the stored radius to be at "
            f"least {box_radius + 1}, it is {env.radius}."
        )
    origin = LatticePoint.origin(env.d)
    snapshots = dict(propagate(env, origin, [n, 2 * n], tau))
    at_n, at_2n = snapshots[n], snapshots[2 * n]
    lo, hi = env.radius - box_radius, env.radius + box_radius + 1
    pi_box = float(env.pi_array[tuple(slice(lo, hi) for _ in range(env.d))].sum())
    mass = at_n.mass_within(box_radius)
    pi0 = pi(env, origin)
    return SandwichReport(
        n=n,
        box_radius=box_radius,
        return_probability=at_2n.get(origin),
        err_bound=at_2n.lost_mass_bound,
        box_mass=mass,
        box_pi_mass=pi_box,
        box_size=box.size,
        pi_origin=pi0,
        rhs_pi_form=mass ** 2 / pi_box,
        rhs_counting_form=pi0 * mass ** 2 / (2 * env.d * box.size),
    )


def clt_lower_bound(env: Environment, n: int, tau: float = DEFAULT_TAU) -> SandwichReport:
    """The sandwich on the box of radius floor(sqrt(n))."""
    return spectral_sandwich(env, n, max(1, math.isqrt(n)), tau)


def two_step_even_kernel(
    modenv: ModifiedEnvironment,
    horizon: int = 0,
    max_states: int = DEFAULT_MAX_STATES,
) -> FiniteChain:
    """P^2 of the modified walk on the even points of [-(N+1+horizon), N+1+horizon]^d.

    Two-step mass that would leave the window is folded into holding, which
    keeps rows stochastic and the chain reversible for pi restricted to Z^d_e.
    """
    d = modenv.d
    half = modenv.N + 1 + horizon
    window = PlainBox(half, d)
    count = sum(1 for p in window.points() if p.is_even())
    if count > max_states:
        raise BudgetError(
            f"The even window of half-width {half} in d={d} has {count} states, "
            f"above the budget of {max_states}."
        )
    env = modenv.materialize(half + 2)
    states = [p for p in window.points() if p.is_even()]
    lookup = {p: i for i, p in enumerate(states)}
    P = np.zeros((count, count), dtype=np.float64)
    pis = np.empty(count, dtype=np.float64)
    for i, x in enumerate(states):
        pis[i] = pi(env, x)
        two_step: Dict[LatticePoint, float] = {}
        for y, pxy in transition_row(env, x).items():
            for z, pyz in transition_row(env, y).items():
                two_step[z] = two_step.get(z, 0.0) + pxy * pyz
        for z, value in two_step.items():
            j = lookup.get(z)
            if j is None:
                P[i, i] += value
            else:
                P[i, j] += value
    P /= P.sum(axis=1, keepdims=True)
    logger.info("Two-step chain on %d even states (half-width %d)", count, half)
    return FiniteChain(list(states), P, pis)


def even_window_neighbors(chain: FiniteChain, x: LatticePoint) -> List[LatticePoint]:
    """Neighbors of ``x`` in Z^d_e that are states of ``chain``."""
    return [y for y in even_neighbors(x) if y in chain]
