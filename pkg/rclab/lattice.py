"""Geometry of Z^d: boxes, inner boundaries, the direction/sign rule and Z^d_e."""
from __future__ import annotations

import itertools
from typing import Iterable, Iterator, List, Set, Tuple, Union

import networkx as nx

from rclab.exceptions import LatticeError
from rclab.models.lattice import Bond, Box, LatticePoint, PlainBox

AnyBox = Union[Box, PlainBox]

GRAPH_NEAREST = "nearest"
GRAPH_EVEN = "even"


def box_contains(box: AnyBox, p: LatticePoint) -> bool:
    return box.contains(p)


def inner_boundary(box: AnyBox) -> Set[LatticePoint]:
    """Points of the box with at least one neighbor outside it."""
    return set(linf_shell(box.half_width, box.d))


def linf_shell(h: int, d: int) -> Iterator[LatticePoint]:
    """All points with sup-norm exactly ``h``, in lexicographic order."""
    if h == 0:
        yield LatticePoint.origin(d)
        return
    for coords in itertools.product(range(-h, h + 1), repeat=d):
        if max(abs(c) for c in coords) == h:
            yield LatticePoint(coords)


def direction_and_sign(x: LatticePoint) -> Tuple[int, int]:
    """Axis i0 (0-based) and sign eps(x) used to lay out a trap next to ``x``.

    i0 is the largest axis index achieving max |x_i|; ties, including the
    origin, resolve to the last axis. eps is +1 iff x_{i0} >= 0.
    """
    top = max(abs(c) for c in x.coords)
    i0 = max(i for i, c in enumerate(x.coords) if abs(c) == top)
    eps = 1 if x.coords[i0] >= 0 else -1
    return i0, eps


def even_neighbors(x: LatticePoint) -> List[LatticePoint]:
    """Neighbors of ``x`` in Z^d_e: the even points at L1 distance exactly 2."""
    if not x.is_even():
        raise LatticeError(f"{x.coords} is not an even point.")
    d = x.d
    out: List[LatticePoint] = []
    for axis in range(d):
        out.append(x.shifted(axis, 2))
        out.append(x.shifted(axis, -2))
    for i, j in itertools.combinations(range(d), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            out.append(x.shifted(i, si).shifted(j, sj))
    return out


def graph_neighbors(x: LatticePoint, graph: str) -> List[LatticePoint]:
    if graph == GRAPH_NEAREST:
        return list(x.neighbors())
    if graph == GRAPH_EVEN:
        return even_neighbors(x)
    raise LatticeError(f"Unknown lattice graph '{graph}'.")


def edge_boundary(points: Iterable[LatticePoint], graph: str = GRAPH_NEAREST) -> int:
    """Number of edges between the set and its complement."""
    members = set(points)
    return sum(
        1 for x in members for y in graph_neighbors(x, graph) if y not in members
    )


def induced_graph(points: Iterable[LatticePoint], graph: str = GRAPH_NEAREST) -> nx.Graph:
    members = set(points)
    g = nx.Graph()
    g.add_nodes_from(members)
    for x in members:
        for y in graph_neighbors(x, graph):
            if y in members:
                g.add_edge(x, y)
    return g


def is_connected(points: Iterable[LatticePoint], graph: str = GRAPH_NEAREST) -> bool:
    g = induced_graph(points, graph)
    return g.number_of_nodes() > 0 and nx.is_connected(g)


def box_bonds(box: AnyBox) -> Iterator[Bond]:
    """Bonds with both endpoints in the box, in canonical order."""
    h = box.half_width
    for p in box.points():
        for axis in range(box.d):
            if p.coords[axis] < h:
                yield Bond(p, p.shifted(axis, 1))
