from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Tuple

from rclab.exceptions import LatticeError


@dataclass(frozen=True, order=True)
class LatticePoint:
    coords: Tuple[int, ...]

    def __post_init__(self) -> None:
        coords = tuple(int(c) for c in self.coords)
        if not coords:
            raise LatticeError("A lattice point needs at least one coordinate.")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, *coords: int) -> LatticePoint:
        return cls(tuple(coords))

    @classmethod
    def origin(cls, d: int) -> LatticePoint:
        return cls((0,) * d)

    @classmethod
    def unit(cls, d: int, axis: int, sign: int = 1) -> LatticePoint:
        coords = [0] * d
        coords[axis] = sign
        return cls(tuple(coords))

    @property
    def d(self) -> int:
        return len(self.coords)

    def __add__(self, other: LatticePoint) -> LatticePoint:
        _check_same_dimension(self, other)
        return LatticePoint(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: LatticePoint) -> LatticePoint:
        _check_same_dimension(self, other)
        return LatticePoint(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def scaled(self, factor: int) -> LatticePoint:
        return LatticePoint(tuple(factor * c for c in self.coords))

    def shifted(self, axis: int, step: int) -> LatticePoint:
        coords = list(self.coords)
        coords[axis] += step
        return LatticePoint(tuple(coords))

    def linf(self) -> int:
        return max(abs(c) for c in self.coords)

    def l1(self) -> int:
        return sum(abs(c) for c in self.coords)

    def is_even(self) -> bool:
        return abs(sum(self.coords)) % 2 == 0

    def neighbors(self) -> Iterator[LatticePoint]:
        """The 2d nearest neighbors, in direction order +e0, -e0, +e1, -e1, ..."""
        for axis in range(self.d):
            yield self.shifted(axis, 1)
            yield self.shifted(axis, -1)


@dataclass(frozen=True, order=True)
class Bond:
    """Unordered nearest-neighbor pair, stored with ``a`` < ``b``."""
    a: LatticePoint
    b: LatticePoint

    def __post_init__(self) -> None:
        _check_same_dimension(self.a, self.b)
        if (self.a - self.b).l1() != 1:
            raise LatticeError(
                f"{self.a.coords} and {self.b.coords} are not nearest neighbors."
            )
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @classmethod
    def between(cls, a: Iterable[int], b: Iterable[int]) -> Bond:
        return cls(LatticePoint(tuple(a)), LatticePoint(tuple(b)))

    @property
    def axis(self) -> int:
        diff = (self.b - self.a).coords
        return next(i for i, c in enumerate(diff) if c != 0)

    @property
    def d(self) -> int:
        return self.a.d

    def endpoints(self) -> Tuple[LatticePoint, LatticePoint]:
        return self.a, self.b

    def touches(self, p: LatticePoint) -> bool:
        return p == self.a or p == self.b


class _CubeWindow:
    """Shared geometry of the cubes [-h, h]^d, with a mixed-radix site index."""

    d: int

    @property
    def half_width(self) -> int:
        raise NotImplementedError

    @property
    def side(self) -> int:
        return 2 * self.half_width + 1

    @property
    def size(self) -> int:
        return self.side ** self.d

    def contains(self, p: LatticePoint) -> bool:
        if p.d != self.d:
            raise LatticeError(
                f"Point of dimension {p.d} tested against a box of dimension {self.d}."
            )
        h = self.half_width
        return all(-h <= c <= h for c in p.coords)

    def contains_bond(self, bond: Bond) -> bool:
        return self.contains(bond.a) and self.contains(bond.b)

    def points(self) -> Iterator[LatticePoint]:
        h = self.half_width
        for coords in itertools.product(range(-h, h + 1), repeat=self.d):
            yield LatticePoint(coords)

    def index(self, p: LatticePoint) -> int:
        if not self.contains(p):
            raise LatticeError(f"{p.coords} lies outside the box.")
        h = self.half_width
        idx = 0
        for c in p.coords:
            idx = idx * self.side + (c + h)
        return idx

    def point(self, index: int) -> LatticePoint:
        if not 0 <= index < self.size:
            raise LatticeError(f"Index {index} outside [0, {self.size}).")
        h = self.half_width
        coords = []
        for _ in range(self.d):
            index, digit = divmod(index, self.side)
            coords.append(digit - h)
        return LatticePoint(tuple(reversed(coords)))


@dataclass(frozen=True)
class Box(_CubeWindow):
    """The scaled box B_N = [-3N, 3N]^d."""
    N: int
    d: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise LatticeError(f"Box scale must be a positive integer, got N={self.N}.")
        if self.d < 1:
            raise LatticeError(f"Dimension must be at least 1, got d={self.d}.")

    @property
    def half_width(self) -> int:
        return 3 * self.N


@dataclass(frozen=True)
class PlainBox(_CubeWindow):
    """The plain box [-R, R]^d used for storage windows and kernel supports."""
    radius: int
    d: int

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise LatticeError(f"Box radius must be non-negative, got {self.radius}.")
        if self.d < 1:
            raise LatticeError(f"Dimension must be at least 1, got d={self.d}.")

    @property
    def half_width(self) -> int:
        return self.radius


def _check_same_dimension(p: LatticePoint, q: LatticePoint) -> None:
    if p.d != q.d:
        raise LatticeError(f"Dimension mismatch: {p.d} vs {q.d}.")
