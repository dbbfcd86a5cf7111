"""I.i.d. conductance fields on a finite box, their modification and storage.

Bonds are indexed in canonical order: sites of [-R, R]^d in lexicographic
order, then the axis of the forward bond (x, x + e_axis). Forward bonds that
leave the box are not stored.
"""
from __future__ import annotations

import hashlib
import logging
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple, Union

import numpy as np

from rclab import rng
from rclab.exceptions import (
    BudgetError,
    EnvironmentFileError,
    FormatVersionError,
    ParameterError,
    StorageError,
)
from rclab.formatters.base import atomic_write_bytes
from rclab.models.environment import (
    LAW_CONSTANT,
    LAW_FIELD,
    LAW_POLY_TAIL,
    LAW_SITE_MIN,
    ConductanceLaw,
)
from rclab.models.lattice import Bond, LatticePoint, PlainBox

logger = logging.getLogger(__name__)

MAGIC = b"RCLB"
FORMAT_VERSION = 1
RNG_IDS = {rng.GENERATOR_NAME: 1}
_HEADER = struct.Struct("<4sHHIBdQBQ")
_CHECKSUM = struct.Struct("<Q")

DEFAULT_MAX_BYTES = 4 << 30


class Environment:
    """Immutable conductance field on the plain box [-radius, radius]^d.

    ``forward[i_1, ..., i_d, axis]`` holds the conductance of the bond from the
    site with array index (i_1, ..., i_d) to its +e_axis neighbor; entries for
    bonds leaving the box are 0.
    """

    def __init__(
        self,
        d: int,
        radius: int,
        law: ConductanceLaw,
        seed: int,
        forward: np.ndarray,
    ) -> None:
        if d < 1:
            raise ParameterError(f"Dimension must be at least 1, got d={d}.")
        if radius < 1:
            raise ParameterError(f"Radius must be at least 1, got {radius}.")
        if not 0 <= int(seed) < 1 << 64:
            raise ParameterError(f"Seed must lie in [0, 2^64), got {seed}.")
        side = 2 * radius + 1
        expected = (side,) * d + (d,)
        if forward.shape != expected:
            raise ParameterError(
                f"Conductance array has shape {forward.shape}, expected {expected}."
            )
        self.d = d
        self.radius = radius
        self.law = law
        self.seed = int(seed)
        forward = np.array(forward, dtype=np.float64, copy=True)
        forward[~_valid_mask(d, side)] = 0.0
        values = forward[_valid_mask(d, side)]
        if values.size and not (np.all(values > 0) and np.all(values <= 1)):
            raise ParameterError("Conductances must lie in (0, 1].")
        forward.setflags(write=False)
        self.forward = forward

    def __repr__(self) -> str:
        return (
            f"Environment(d={self.d}, radius={self.radius}, "
            f"law={self.law.label()}, seed={self.seed})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.d == other.d
            and self.radius == other.radius
            and self.law == other.law
            and self.seed == other.seed
            and np.array_equal(self.forward, other.forward)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def box(self) -> PlainBox:
        return PlainBox(self.radius, self.d)

    @property
    def bond_count(self) -> int:
        return bond_count(self.d, self.radius)

    @cached_property
    def valid_mask(self) -> np.ndarray:
        return _valid_mask(self.d, self.side)

    def conductances(self) -> np.ndarray:
        """All stored conductances in canonical bond order."""
        return self.forward[self.valid_mask]

    def array_index(self, p: LatticePoint) -> Tuple[int, ...]:
        if p.d != self.d or not self.box.contains(p):
            raise StorageError(f"Site {p.coords} lies outside the stored box.")
        return tuple(c + self.radius for c in p.coords)

    def contains(self, p: LatticePoint) -> bool:
        return p.d == self.d and self.box.contains(p)

    def is_interior(self, p: LatticePoint) -> bool:
        """True if all 2d bonds at ``p`` are stored."""
        return p.d == self.d and p.linf() <= self.radius - 1

    def conductance(self, bond: Bond) -> float:
        if not (self.contains(bond.a) and self.contains(bond.b)):
            raise StorageError(
                f"Bond {bond.a.coords}-{bond.b.coords} lies outside the stored box."
            )
        return float(self.forward[self.array_index(bond.a) + (bond.axis,)])

    def conductance_between(self, a: LatticePoint, b: LatticePoint) -> float:
        return self.conductance(Bond(a, b))

    @cached_property
    def directional(self) -> np.ndarray:
        """Conductances per site and direction +e0, -e0, +e1, -e1, ...

        Directions leaving the box carry 0.
        """
        d = self.d
        out = np.zeros((self.side,) * d + (2 * d,), dtype=np.float64)
        for axis in range(d):
            fwd = self.forward[..., axis]
            out[..., 2 * axis] = fwd
            back = np.zeros_like(fwd)
            dst = [slice(None)] * d
            src = [slice(None)] * d
            dst[axis] = slice(1, None)
            src[axis] = slice(None, -1)
            back[tuple(dst)] = fwd[tuple(src)]
            out[..., 2 * axis + 1] = back
        out.setflags(write=False)
        return out

    @cached_property
    def pi_array(self) -> np.ndarray:
        """pi(x) per site; partial on the outermost layer."""
        pi = self.directional.sum(axis=-1)
        pi.setflags(write=False)
        return pi

    @cached_property
    def inv_pi_array(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            inv = np.where(self.pi_array > 0, 1.0 / self.pi_array, 0.0)
        inv.setflags(write=False)
        return inv

    @cached_property
    def step_cdf(self) -> np.ndarray:
        """Cumulative one-step probabilities per site, in direction order."""
        cdf = np.cumsum(self.directional, axis=-1) * self.inv_pi_array[..., None]
        cdf[..., -1] = np.where(self.pi_array > 0, 1.0, 0.0)
        cdf.setflags(write=False)
        return cdf


@dataclass(frozen=True)
class ModifiedEnvironment:
    """The field reset to 1 on every bond not inside [-(N+1), N+1]^d."""
    base: Environment
    N: int

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def protected(self) -> PlainBox:
        return PlainBox(self.N + 1, self.base.d)

    def conductance(self, bond: Bond) -> float:
        if self.protected.contains_bond(bond):
            return self.base.conductance(bond)
        return 1.0

    def materialize(self, radius: int) -> Environment:
        """The modified field as an explicit environment on [-radius, radius]^d."""
        if radius < 1:
            raise ParameterError(f"Radius must be at least 1, got {radius}.")
        d = self.base.d
        side = 2 * radius + 1
        forward = np.ones((side,) * d + (d,), dtype=np.float64)
        keep = min(self.N + 1, radius)
        inner = self.base.forward[
            tuple(slice(self.base.radius - keep, self.base.radius + keep + 1) for _ in range(d))
        ]
        for axis in range(d):
            sub = [slice(radius - keep, radius + keep + 1)] * d
            src = [slice(None)] * d
            sub[axis] = slice(radius - keep, radius + keep)
            src[axis] = slice(0, 2 * keep)
            forward[tuple(sub) + (axis,)] = inner[tuple(src) + (axis,)]
        return Environment(d, radius, ConductanceLaw.field(), self.base.seed, forward)


def bond_count(d: int, radius: int) -> int:
    side = 2 * radius + 1
    return d * (side - 1) * side ** (d - 1)


def sample_environment(
    d: int,
    radius: int,
    law: ConductanceLaw,
    seed: int,
    *,
    threads: int = 1,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> Environment:
    """Sample i.i.d. conductances; a pure function of (d, radius, law, seed)."""
    if d < 1:
        raise ParameterError(f"Dimension must be at least 1, got d={d}.")
    if radius < 1:
        raise ParameterError(f"Radius must be at least 1, got {radius}.")
    if not 0 <= int(seed) < 1 << 64:
        raise ParameterError(f"Seed must lie in [0, 2^64), got {seed}.")
    if law.kind == LAW_FIELD:
        raise ParameterError("An explicit field cannot be sampled; use plant().")
    side = 2 * radius + 1
    count = bond_count(d, radius)
    required = 8 * (side ** d) * d
    if required > max_bytes:
        raise BudgetError(
            f"Environment with {count} bonds needs {required} bytes of storage, "
            f"above the limit of {max_bytes} bytes."
        )

    mask = _valid_mask(d, side)
    forward = np.zeros((side,) * d + (d,), dtype=np.float64)
    if law.kind == LAW_POLY_TAIL:
        u = rng.parallel_uniforms(seed, rng.STREAM_BONDS, count, threads=threads)
        forward[mask] = u ** (1.0 / law.parameter)
    elif law.kind == LAW_SITE_MIN:
        u = rng.parallel_uniforms(seed, rng.STREAM_SITES, side ** d, threads=threads)
        site = (u ** (1.0 / law.parameter)).reshape((side,) * d)
        for axis in range(d):
            ahead = np.roll(site, -1, axis=axis)
            forward[..., axis] = np.minimum(site, ahead)
    elif law.kind == LAW_CONSTANT:
        forward[mask] = law.parameter
    logger.debug("Sampled %d bonds (d=%d, radius=%d, %s)", count, d, radius, law.label())
    return Environment(d, radius, law, seed, forward)


def conductance(env: Union[Environment, ModifiedEnvironment], bond: Bond) -> float:
    return env.conductance(bond)


def modify(env: Union[Environment, ModifiedEnvironment], N: int) -> ModifiedEnvironment:
    if isinstance(env, ModifiedEnvironment):
        return ModifiedEnvironment(env.base, min(env.N, N))
    if N < 0 or N + 1 > env.radius:
        raise StorageError(
            f"Protected box [-{N + 1}, {N + 1}]^{env.d} does not fit in the stored "
            f"radius {env.radius}."
        )
    return ModifiedEnvironment(env, N)


def box_min_conductance(env: Environment, half_width: int) -> float:
    """Smallest conductance among bonds with both endpoints in [-h, h]^d."""
    if half_width < 1 or half_width > env.radius:
        raise StorageError(
            f"Box of half-width {half_width} does not fit in the stored radius {env.radius}."
        )
    lo, hi = env.radius - half_width, env.radius + half_width
    best = math.inf
    for axis in range(env.d):
        window = [slice(lo, hi + 1)] * env.d
        window[axis] = slice(lo, hi)
        best = min(best, float(env.forward[tuple(window) + (axis,)].min()))
    return best


def min_conductance_statistic(env: Environment, N: int) -> float:
    """log(min conductance in [-N, N]^d) / log N."""
    if N < 2:
        raise ParameterError(f"N must be at least 2 for log N to be useful, got {N}.")
    return math.log(box_min_conductance(env, N)) / math.log(N)


def alpha_threshold(d: int, gamma: float, mu: float, N: int) -> float:
    """alpha(N) = N^-(d/gamma + mu)."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}.")
    return float(N) ** (-(d / gamma + mu))


def min_conductance_event(
    env: Environment, N: int, mu: float, gamma: Optional[float] = None,
) -> bool:
    """Whether every bond inside [-(N+1), N+1]^d is at least N^-(d/gamma + mu)."""
    g = gamma if gamma is not None else env.law.gamma
    if g is None:
        raise ParameterError("The event needs gamma; the environment law has none.")
    return box_min_conductance(env, N + 1) >= alpha_threshold(env.d, g, mu, N)


def plant(env: Environment, overrides: Mapping[Bond, float]) -> Environment:
    """A copy of ``env`` with some bonds set explicitly."""
    forward = np.array(env.forward, copy=True)
    for bond, value in overrides.items():
        if not 0 < value <= 1:
            raise ParameterError(f"Planted conductance {value} outside (0, 1].")
        forward[env.array_index(bond.a) + (bond.axis,)] = value
        if not env.contains(bond.b):
            raise StorageError(f"Bond {bond.a.coords}-{bond.b.coords} leaves the box.")
    return Environment(env.d, env.radius, ConductanceLaw.field(), env.seed, forward)


def environment_from_values(
    d: int, radius: int, values: Mapping[Bond, float], default: float = 1.0, seed: int = 0,
) -> Environment:
    """Explicit environment: every bond ``default`` except the given ones."""
    side = 2 * radius + 1
    forward = np.full((side,) * d + (d,), default, dtype=np.float64)
    base = Environment(d, radius, ConductanceLaw.field(), seed, forward)
    return plant(base, values)


def save(env: Environment, path: Union[str, Path]) -> None:
    payload = np.ascontiguousarray(env.conductances(), dtype="<f8").tobytes()
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        env.d,
        env.radius,
        env.law.tag,
        env.law.parameter,
        env.seed,
        RNG_IDS[rng.GENERATOR_NAME],
        env.bond_count,
    )
    body = header + payload
    atomic_write_bytes(Path(path), body + _CHECKSUM.pack(_checksum(body)))


def load(path: Union[str, Path]) -> Environment:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise EnvironmentFileError(f"Cannot read environment file {p}.") from exc

    if len(data) < _HEADER.size + _CHECKSUM.size:
        raise EnvironmentFileError(f"Environment file {p.name} is truncated.")
    try:
        magic, version, d, radius, tag, param, seed, rng_id, count = _HEADER.unpack_from(data)
    except struct.error as exc:
        raise EnvironmentFileError(f"Cannot parse header of {p.name}.") from exc
    if magic != MAGIC:
        raise EnvironmentFileError(f"{p.name} is not an environment file (bad magic).")
    if version > FORMAT_VERSION:
        raise FormatVersionError(
            f"{p.name} has format version {version}; this build reads up to "
            f"version {FORMAT_VERSION}."
        )
    if rng_id not in RNG_IDS.values():
        raise EnvironmentFileError(f"{p.name} names an unknown generator id {rng_id}.")
    expected_len = _HEADER.size + 8 * count + _CHECKSUM.size
    if len(data) != expected_len:
        raise EnvironmentFileError(
            f"Environment file {p.name} is truncated or padded: "
            f"{len(data)} bytes, expected {expected_len}."
        )
    body = data[:-_CHECKSUM.size]
    (stored,) = _CHECKSUM.unpack_from(data, len(body))
    if stored != _checksum(body):
        raise EnvironmentFileError(f"Checksum mismatch in {p.name}; the file is corrupt.")
    if count != bond_count(d, radius):
        raise EnvironmentFileError(
            f"{p.name} declares {count} bonds, but d={d}, radius={radius} has "
            f"{bond_count(d, radius)}."
        )

    values = np.frombuffer(body, dtype="<f8", count=count, offset=_HEADER.size)
    side = 2 * radius + 1
    forward = np.zeros((side,) * d + (d,), dtype=np.float64)
    forward[_valid_mask(d, side)] = values
    try:
        law = ConductanceLaw.from_tag(tag, param)
    except ParameterError as exc:
        raise EnvironmentFileError(f"{p.name} has an invalid law header.") from exc
    return Environment(d, radius, law, seed, forward)


def describe(env: Environment) -> Mapping[str, Any]:
    values = env.conductances()
    return {
        "d": env.d,
        "radius": env.radius,
        "law": env.law.to_dict(),
        "seed": env.seed,
        "generator": rng.GENERATOR_NAME,
        "bond_count": env.bond_count,
        "min": float(values.min()),
        "max": float(values.max()),
        "mean": float(values.mean()),
    }


def _valid_mask(d: int, side: int) -> np.ndarray:
    mask = np.ones((side,) * d + (d,), dtype=bool)
    for axis in range(d):
        index = [slice(None)] * d
        index[axis] = side - 1
        mask[tuple(index) + (axis,)] = False
    return mask


def _checksum(data: bytes) -> int:
    digest = hashlib.blake2b(data, digest_size=8).digest()
    return int.from_bytes(digest, "little")


__all__ = [
    "LAW_CONSTANT",
    "LAW_POLY_TAIL",
    "LAW_SITE_MIN",
    "Environment",
    "ModifiedEnvironment",
    "alpha_threshold",
    "box_min_conductance",
    "conductance",
    "environment_from_values",
    "load",
    "min_conductance_event",
    "min_conductance_statistic",
    "modify",
    "plant",
    "sample_environment",
    "save",
]
