"""Isoperimetric profiles of finite reversible chains and the heat-kernel
time threshold they yield.

pi is kept unnormalized throughout (sums of conductances), so the limits of
the threshold integral use raw pi values.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from rclab import rng
from rclab.environment import ModifiedEnvironment, alpha_threshold, box_min_conductance
from rclab.exceptions import BudgetError, EnvironmentFileError, ParameterError
from rclab.kernel import two_step_even_kernel
from rclab.lattice import GRAPH_EVEN, GRAPH_NEAREST, edge_boundary, even_neighbors, is_connected
from rclab.models.chain import (
    FiniteChain,
    IsoProfile,
    MPCheck,
    MPReport,
    ProfileBreakpoint,
    SurfaceVolumeReport,
)
from rclab.models.lattice import LatticePoint, PlainBox

logger = logging.getLogger(__name__)

MAX_STATES = 20
MAX_SUBSETS = 1 << 20

States = Iterable[Hashable]


def edge_measure(chain: FiniteChain, S1: States, S2: States) -> float:
    """Q(S1, S2) = sum of pi(x) P(x, y) over x in S1, y in S2."""
    a = chain.indices(S1)
    b = chain.indices(S2)
    if not a or not b:
        return 0.0
    return float(chain.Q[np.ix_(a, b)].sum())


def phi_S(chain: FiniteChain, S: States) -> float:
    """Q(S, S^c) / pi(S); zero for the full state set."""
    inside = chain.indices(S)
    if not inside:
        raise ParameterError("The boundary ratio of the empty set is undefined.")
    outside = sorted(set(range(chain.size)) - set(inside))
    if not outside:
        return 0.0
    q = float(chain.Q[np.ix_(inside, outside)].sum())
    return q / float(chain.pi[inside].sum())


def connected_subsets(chain: FiniteChain, max_subsets: int = MAX_SUBSETS) -> Iterator[int]:
    """Every nonempty connected proper subset, as a bitmask over state indices.

    Each set is produced once, from its lowest index: the search either adds
    the lowest frontier vertex or forbids it for the rest of the branch.
    """
    nbr = chain.neighbor_masks()
    k = chain.size
    full = (1 << k) - 1
    produced = 0

    def grow(S: int, frontier: int, forbidden: int) -> Iterator[int]:
        nonlocal produced
        if S != full:
            produced += 1
            if produced > max_subsets:
                raise BudgetError(
                    f"More than {max_subsets} connected subsets; use the sampled profile instead."
                )
            yield S
        while frontier:
            w = frontier & -frontier
            frontier ^= w
            grown = S | w
            yield from grow(grown, (frontier | nbr[w.bit_length() - 1]) & ~grown & ~forbidden, forbidden)
            forbidden |= w

    for v in range(k):
        lower = (1 << (v + 1)) - 1
        root = 1 << v
        yield from grow(root, nbr[v] & ~lower, lower)


def _mask_states(mask: int) -> Tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _profile_from_sets(
    sets: Iterable[Tuple[float, float, int]],
    r_grid: Optional[Sequence[float]],
    certified: bool,
) -> IsoProfile:
    ordered = sorted(sets, key=lambda t: (t[0], t[1]))
    breakpoints: List[ProfileBreakpoint] = []
    best = math.inf
    for mass, phi, mask in ordered:
        if phi < best:
            best = phi
            if breakpoints and breakpoints[-1].r == mass:
                breakpoints[-1] = ProfileBreakpoint(mass, phi, _mask_states(mask))
            else:
                breakpoints.append(ProfileBreakpoint(mass, phi, _mask_states(mask)))
    profile = IsoProfile(breakpoints, certified)
    if r_grid is None:
        return profile
    on_grid = []
    for r in sorted(r_grid):
        current = [bp for bp in breakpoints if bp.r <= r]
        if current:
            on_grid.append(ProfileBreakpoint(float(r), current[-1].phi, current[-1].minimizer))
    return IsoProfile(on_grid, certified)


def iso_profile(
    chain: FiniteChain,
    r_grid: Optional[Sequence[float]] = None,
    max_states: int = MAX_STATES,
    max_subsets: int = MAX_SUBSETS,
) -> IsoProfile:
    """Exact profile Phi(r) = min Phi_S over connected S with pi(S) <= r.

    Without ``r_grid`` the result lists every point where Phi drops.
    """
    if chain.size > max_states:
        raise BudgetError(
            f"Exact profile enumeration is limited to {max_states} states, the chain has "
            f"{chain.size}; use the sampled profile instead."
        )
    pi = chain.pi
    Q = chain.Q

    def scored() -> Iterator[Tuple[float, float, int]]:
        for mask in connected_subsets(chain, max_subsets):
            inside = list(_mask_states(mask))
            outside = [i for i in range(chain.size) if not mask >> i & 1]
            mass = float(pi[inside].sum())
            yield mass, float(Q[np.ix_(inside, outside)].sum()) / mass, mask

    profile = _profile_from_sets(scored(), r_grid, certified=True)
    logger.debug("Profile with %d breakpoints over %d states", len(profile.breakpoints), chain.size)
    return profile


def sampled_profile(chain: FiniteChain, samples: int, seed: int) -> IsoProfile:
    """Profile over randomly grown connected sets; an upper bound, not certified."""
    if chain.size < 2:
        raise ParameterError("Sampling proper subsets needs at least 2 states.")
    gen = rng.generator(seed, rng.STREAM_SUBSETS)
    adj = chain.adjacency
    pi = chain.pi
    Q = chain.Q
    seen: Set[int] = set()
    found: List[Tuple[float, float, int]] = []
    for _ in range(samples):
        root = int(gen.integers(chain.size))
        target = int(gen.integers(1, chain.size))
        members = {root}
        frontier = set(np.nonzero(adj[root])[0].tolist())
        while len(members) < target and frontier:
            pick = sorted(frontier)[int(gen.integers(len(frontier)))]
            members.add(pick)
            frontier |= set(np.nonzero(adj[pick])[0].tolist())
            frontier -= members
        mask = sum(1 << i for i in members)
        if mask in seen:
            continue
        seen.add(mask)
        inside = sorted(members)
        outside = [i for i in range(chain.size) if i not in members]
        mass = float(pi[inside].sum())
        found.append((mass, float(Q[np.ix_(inside, outside)].sum()) / mass, mask))
    return _profile_from_sets(found, None, certified=False)


@dataclass(frozen=True)
class PowerProfile:
    """Analytic profile Phi(r) = c r^(-1/d)."""
    c: float
    d: int

    def evaluate(self, r: float) -> float:
        return self.c * r ** (-1.0 / self.d)

    def integral(self, lo: float, hi: float) -> float:
        """Integral of 4 / (u Phi(u)^2) over [lo, hi]."""
        if hi <= lo:
            return 0.0
        e = 2.0 / self.d
        return (4.0 / self.c ** 2) * (self.d / 2.0) * (hi ** e - lo ** e)


def profile_integral(profile: Union[IsoProfile, PowerProfile], lo: float, hi: float) -> float:
    """Integral of 4 / (u Phi(u)^2) over [lo, hi], exact on step profiles."""
    if hi <= lo:
        return 0.0
    if isinstance(profile, PowerProfile):
        return profile.integral(lo, hi)
    total = 0.0
    bps = profile.breakpoints
    for i, bp in enumerate(bps):
        a = max(lo, bp.r)
        b = min(hi, bps[i + 1].r) if i + 1 < len(bps) else hi
        if b > a:
            total += 4.0 / bp.phi ** 2 * math.log(b / a)
    return total


def mp_threshold(
    chain: FiniteChain,
    sigma: float,
    epsilon: float,
    x: Hashable,
    y: Hashable,
    profile: Optional[Union[IsoProfile, PowerProfile]] = None,
) -> int:
    """Smallest n >= 1 + ((1-sigma)^2/sigma^2) * int_{4 min(pi(x),pi(y))}^{4/eps} 4 du / (u Phi(u)^2)."""
    if not 0 < sigma <= 0.5:
        raise ParameterError(f"sigma must lie in (0, 1/2], got {sigma}.")
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}.")
    holding = float(chain.holding().min())
    if holding < sigma * (1 - 1e-12):
        raise ParameterError(
            f"Every holding probability must be at least sigma={sigma}; the smallest is {holding:.6g}."
        )
    pi_x, pi_y = float(chain.pi[chain.index(x)]), float(chain.pi[chain.index(y)])
    if 4.0 * min(pi_x, pi_y) >= 4.0 / epsilon:
        return 1
    prof = profile if profile is not None else iso_profile(chain)
    return threshold_time(prof, sigma, epsilon, pi_x, pi_y)


def threshold_time(
    profile: Union[IsoProfile, PowerProfile],
    sigma: float,
    epsilon: float,
    pi_x: float,
    pi_y: float,
) -> int:
    """The time threshold for given end-point masses, without a chain at hand."""
    lo = 4.0 * min(pi_x, pi_y)
    hi = 4.0 / epsilon
    if lo >= hi:
        return 1
    integral = profile_integral(profile, lo, hi)
    return max(1, math.ceil(1.0 + ((1 - sigma) ** 2 / sigma ** 2) * integral - 1e-9))


INFORMATIVE_NOTE = (
    "pi is unnormalized, so P^n(x, y) tends to pi(y)/pi(V); the bound eps*pi(y) "
    "is only tested when eps*pi(V) > 1."
)


def verify_mp(
    chain: FiniteChain,
    epsilon: float,
    pairs: Optional[Sequence[Tuple[Hashable, Hashable]]] = None,
    sigma: Optional[float] = None,
) -> MPReport:
    """Check P^n(x, y) <= eps pi(y) at n = mp_threshold by exact matrix powers."""
    s = sigma if sigma is not None else min(0.5, float(chain.holding().min()))
    profile = iso_profile(chain)
    todo = list(pairs) if pairs is not None else [(a, b) for a in chain.states for b in chain.states]
    informative = epsilon * float(chain.pi.sum()) > 1.0
    report = MPReport(epsilon, s, note=INFORMATIVE_NOTE)
    powers: Dict[int, np.ndarray] = {}
    for x, y in todo:
        n = mp_threshold(chain, s, epsilon, x, y, profile)
        if n not in powers:
            powers[n] = chain.power(n)
        i, j = chain.index(x), chain.index(y)
        report.checks.append(
            MPCheck(i, j, n, float(powers[n][i, j]), epsilon * float(chain.pi[j]), informative)
        )
    if report.violations:
        logger.warning("verify_mp: %d violations at eps=%g", len(report.violations), epsilon)
    return report


def surface_volume_check(
    modenv: ModifiedEnvironment,
    N: int,
    mu: float,
    subset: Iterable[LatticePoint],
    *,
    gamma: Optional[float] = None,
    alpha: Optional[float] = None,
) -> SurfaceVolumeReport:
    """Edge measure and pi-mass of an even set under the two-step modified walk.

    Checks Q(L, L^c) >= (alpha^2 / 2d) |dL| and pi(L) <= 2d |L|, where
    alpha = N^-(d/gamma + mu) unless given explicitly.
    """
    members = set(subset)
    if not members:
        raise ParameterError("The set must be nonempty.")
    if any(not p.is_even() for p in members):
        raise ParameterError("The set must consist of even points.")
    if not is_connected(members, GRAPH_EVEN):
        raise ParameterError("The set is not connected in the even lattice.")
    d = modenv.d
    g = gamma if gamma is not None else modenv.base.law.gamma
    if alpha is not None:
        a = alpha
    elif g is not None:
        a = alpha_threshold(d, g, mu, N)
    else:
        a = box_min_conductance(modenv.base, N + 1)
    precondition = box_min_conductance(modenv.base, N + 1) >= a

    reach = max(p.linf() for p in members) + 2
    chain = two_step_even_kernel(modenv, horizon=max(0, reach - (N + 1)))
    inside = chain.indices(members)
    outside = sorted(set(range(chain.size)) - set(inside))
    q = float(chain.Q[np.ix_(inside, outside)].sum()) if outside else 0.0
    mass = float(chain.pi[inside].sum())
    boundary = edge_boundary(members, GRAPH_EVEN)
    return SurfaceVolumeReport(
        size=len(members),
        boundary_edges=boundary,
        edge_measure=q,
        pi_mass=mass,
        alpha=a,
        precondition=precondition,
        surface_bound=a ** 2 / (2 * d) * boundary,
        volume_bound=2.0 * d * len(members),
    )


def iso_constant_check(d: int, shapes: Iterable[Iterable[LatticePoint]]) -> float:
    """min |dL| / |L|^((d-1)/d) over the given connected shapes."""
    best = math.inf
    for shape in shapes:
        members = set(shape)
        if not members:
            continue
        if any(p.d != d for p in members):
            raise ParameterError(f"Shapes must lie in dimension {d}.")
        if not is_connected(members, GRAPH_NEAREST):
            raise ParameterError("Shapes must be connected.")
        ratio = edge_boundary(members, GRAPH_NEAREST) / len(members) ** ((d - 1) / d)
        best = min(best, ratio)
    if best == math.inf:
        raise ParameterError("No nonempty shapes given.")
    return best


def random_connected_even_subset(window: PlainBox, size: int, seed: int) -> Set[LatticePoint]:
    """A connected set of even points of ``window`` grown from the origin."""
    if size < 1:
        raise ParameterError("Size must be at least 1.")
    gen = rng.generator(seed, rng.STREAM_SUBSETS)
    members = {LatticePoint.origin(window.d)}
    frontier = {p for p in even_neighbors(LatticePoint.origin(window.d)) if window.contains(p)}
    while len(members) < size and frontier:
        ordered = sorted(frontier)
        pick = ordered[int(gen.integers(len(ordered)))]
        members.add(pick)
        frontier.discard(pick)
        frontier |= {p for p in even_neighbors(pick) if window.contains(p) and p not in members}
    return members


def lazy_cycle(k: int, conductance: float = 1.0) -> FiniteChain:
    """Lazy walk on a k-cycle: hold 1/2, move to each neighbor 1/4."""
    if k < 3:
        raise ParameterError(f"A cycle needs at least 3 states, got {k}.")
    P = np.zeros((k, k))
    for i in range(k):
        P[i, i] = 0.5
        P[i, (i + 1) % k] += 0.25
        P[i, (i - 1) % k] += 0.25
    return FiniteChain(list(range(k)), P, np.full(k, 2.0 * conductance))


def random_reversible_chain(k: int, seed: int, extra_edge_probability: float = 0.3) -> FiniteChain:
    """Lazy walk with conductances in [1, 2] on a random connected graph.

    The graph is a path through all states plus independent extra edges.
    """
    if k < 2:
        raise ParameterError(f"A chain needs at least 2 states, got {k}.")
    gen = rng.generator(seed, rng.STREAM_SUBSETS)
    C = np.zeros((k, k))
    for i in range(k - 1):
        C[i, i + 1] = C[i + 1, i] = 1.0 + float(gen.random())
    for i in range(k):
        for j in range(i + 2, k):
            if gen.random() < extra_edge_probability:
                C[i, j] = C[j, i] = 1.0 + float(gen.random())
    pi = C.sum(axis=1)
    P = 0.5 * np.eye(k) + 0.5 * C / pi[:, None]
    return FiniteChain(list(range(k)), P, pi)


def _label_to_json(s: Hashable) -> object:
    if isinstance(s, LatticePoint):
        return list(s.coords)
    return s


def _label_from_json(s: object) -> Hashable:
    if isinstance(s, list):
        return LatticePoint(tuple(s))
    return s  # type: ignore[return-value]


def chain_to_dict(chain: FiniteChain) -> Dict[str, object]:
    """The chain as {states, P, pi} with P dense and row-major."""
    return {
        "states": [_label_to_json(s) for s in chain.states],
        "P": chain.P.tolist(),
        "pi": chain.pi.tolist(),
    }


def chain_from_dict(data: Dict[str, object]) -> FiniteChain:
    try:
        states = [_label_from_json(s) for s in data["states"]]  # type: ignore[union-attr]
        P = np.array(data["P"], dtype=np.float64)
        pi = np.array(data["pi"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError("Chain JSON needs 'states', 'P' and 'pi'.") from exc
    return FiniteChain(states, P, pi)


def chain_to_json(chain: FiniteChain) -> str:
    return json.dumps(chain_to_dict(chain), indent=2)


def chain_from_json(text: str) -> FiniteChain:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError("Chain text is not valid JSON.") from exc
    if not isinstance(data, dict):
        raise ParameterError("Chain JSON must be an object.")
    return chain_from_dict(data)


def load_chain(path: Union[str, Path]) -> FiniteChain:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise EnvironmentFileError(f"Cannot read chain file {p}.") from exc
    return chain_from_json(text)
