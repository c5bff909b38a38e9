"""The grid graph G_d, its edge-subdivided extension, and graph-state circuits.

Coordinates are ``(x, y)`` with ``x`` growing to the right and ``y`` growing
downwards; grid vertices sit on integer points of a ``d^3 x d^3`` lattice.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import GateKind, LayeredCircuit, gate

V1, V2, VSTAR = 0, 1, 2
CLASS_NAMES = {V1: "V1", V2: "V2", VSTAR: "VSTAR"}


class GridValidityWarning(UserWarning):
    """The instance is below the size where the hardness guarantee applies."""


@dataclass(frozen=True)
class GridSpec:
    d: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 2 or self.d % 2:
            raise ValueError(f"d must be an even integer >= 2, got {self.d!r}")

    @property
    def side(self) -> int:
        return self.d**3

    @property
    def k(self) -> int:
        return self.d**2 * (self.d - 1)

    @property
    def n_e(self) -> int:
        return self.k**2

    @property
    def n_v1(self) -> int:
        return self.d**6

    @property
    def n_v2(self) -> int:
        return self.d**4 * (self.d - 1) ** 2

    @property
    def n_vstar(self) -> int:
        d = self.d
        return 2 * d**3 * (d**3 - 1) + 4 * d**4 * (d - 1) ** 2

    @property
    def m_e(self) -> int:
        return self.n_v1 + self.n_v2 + self.n_vstar

    @property
    def valid(self) -> bool:
        return 3 * self.m_e ** (1 / 7) < self.d - 2

    def check(self) -> "GridSpec":
        if not self.valid:
            warnings.warn(
                f"d={self.d}: 3*m_e^(1/7) < d-2 does not hold; the construction runs "
                "but the classical hardness guarantee does not apply",
                GridValidityWarning,
                stacklevel=2,
            )
        return self


@dataclass
class Graph:
    """Plain undirected graph with per-vertex class tag and coordinates."""

    coords: np.ndarray
    vclass: np.ndarray
    edges: list[tuple[int, int]]
    labels: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass
class ExtendedGraph:
    """Edge-subdivided graph in canonical vertex order.

    ``host[w]`` gives the original edge (canonical endpoint indices) that a
    VSTAR vertex ``w`` subdivides; ``u_label[v]`` is the 0-based ``(i, j)``
    label of a V2 vertex (``i`` horizontal, ``j`` vertical).
    """

    coords: np.ndarray
    vclass: np.ndarray
    adj: list[list[int]]
    host: dict[int, tuple[int, int]]
    u_label: dict[int, tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in range(self.n) for v in self.adj[u] if u < v)

    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.adj])

    def label_index(self) -> dict[tuple[int, int], int]:
        return {lab: v for v, lab in self.u_label.items()}

    def spatial_order(self) -> np.ndarray:
        """Vertices sorted by ``(y, x)``; a low-bandwidth elimination order."""
        return np.lexsort((self.coords[:, 0], self.coords[:, 1]))

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "index": v,
                    "class": CLASS_NAMES[int(self.vclass[v])],
                    "coord": [float(self.coords[v, 0]), float(self.coords[v, 1])],
                    "adj": sorted(self.adj[v]),
                }
                for v in range(self.n)
            ]
        )


def build_gd(d: int) -> Graph:
    """G_d: the ``d^3 x d^3`` grid plus a centre vertex in every in-box cell."""
    spec = GridSpec(d)
    side = spec.side
    coords: list[tuple[float, float]] = []
    vclass: list[int] = []
    grid = {}
    for y in range(side):
        for x in range(side):
            grid[x, y] = len(coords)
            coords.append((x, y))
            vclass.append(V1)
    edges = []
    for y in range(side):
        for x in range(side):
            if x + 1 < side:
                edges.append((grid[x, y], grid[x + 1, y]))
            if y + 1 < side:
                edges.append((grid[x, y], grid[x, y + 1]))
    labels = {}
    for y in range(side):
        for x in range(side):
            # cell with top-left corner (x, y) must lie inside one d x d box
            if x % d == d - 1 or y % d == d - 1:
                continue
            c = len(coords)
            coords.append((x + 0.5, y + 0.5))
            vclass.append(V2)
            i = (x // d) * (d - 1) + x % d
            j = (y // d) * (d - 1) + y % d
            labels[c] = (i, j)
            for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1)):
                edges.append((grid[x + dx, y + dy], c))
    return Graph(np.array(coords, dtype=float), np.array(vclass, dtype=np.int8), edges, labels)


def canonical_ordering(coords: np.ndarray, vclass: np.ndarray, edges: Sequence[tuple[int, int]]):
    """Canonical order of the subdivided graph.

    Original vertices are ordered by class then row-major ``(y, x)``; the
    inserted vertices follow, ordered by the canonical indices of their host
    edge's endpoints.  Returns ``(order, star_edges)`` where ``order`` maps
    canonical index -> input vertex and ``star_edges`` lists host edges as
    canonical endpoint pairs, already in canonical order.
    """
    coords = np.asarray(coords, dtype=float)
    vclass = np.asarray(vclass)
    order = np.lexsort((coords[:, 0], coords[:, 1], vclass))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    star = sorted({tuple(sorted((int(rank[u]), int(rank[v])))) for u, v in edges})
    return order, star


def extend_graph(g: Graph) -> ExtendedGraph:
    """Insert a VSTAR vertex on every edge and index everything canonically."""
    order, star = canonical_ordering(g.coords, g.vclass, g.edges)
    n0 = len(order)
    rank = np.empty(n0, dtype=np.int64)
    rank[order] = np.arange(n0)
    n = n0 + len(star)
    coords = np.zeros((n, 2))
    vclass = np.full(n, VSTAR, dtype=np.int8)
    coords[:n0] = g.coords[order]
    vclass[:n0] = g.vclass[order]
    adj: list[list[int]] = [[] for _ in range(n)]
    host = {}
    for k, (u, v) in enumerate(star):
        w = n0 + k
        coords[w] = (coords[u] + coords[v]) / 2
        host[w] = (u, v)
        adj[u].append(w)
        adj[v].append(w)
        adj[w] = [u, v]
    u_label = {int(rank[v]): lab for v, lab in g.labels.items()}
    return ExtendedGraph(coords, vclass, [sorted(a) for a in adj], host, u_label)


@lru_cache(maxsize=4)
def extended_gd(d: int) -> ExtendedGraph:
    GridSpec(d).check()
    return extend_graph(build_gd(d))


def edge_color(eg: ExtendedGraph) -> list[list[tuple[int, int]]]:
    """Greedy proper edge colouring; edges visited in canonical order."""
    used: list[set[int]] = [set() for _ in range(eg.n)]
    classes: list[list[tuple[int, int]]] = []
    for u, v in eg.edges:
        c = 0
        while c in used[u] or c in used[v]:
            c += 1
        if c == len(classes):
            classes.append([])
        classes[c].append((u, v))
        used[u].add(c)
        used[v].add(c)
    return classes


def build_graph_state_circuit(eg: ExtendedGraph) -> LayeredCircuit:
    """Layer 0: H everywhere; then one CZ layer per colour class."""
    c = LayeredCircuit(eg.n, [[gate(GateKind.H, q) for q in range(eg.n)]])
    for matching in edge_color(eg):
        c.append_layer([gate(GateKind.CZ, u, v) for u, v in matching])
    return c


def stabilizer_generator(eg: ExtendedGraph, u: int) -> tuple[np.ndarray, np.ndarray]:
    """X/Z support of ``X_u`` times ``Z`` on every neighbour of ``u``."""
    x = np.zeros(eg.n, dtype=np.uint8)
    z = np.zeros(eg.n, dtype=np.uint8)
    x[u] = 1
    z[eg.adj[u]] = 1
    return x, z


def enumerate_disjoint_triangles(eg: ExtendedGraph) -> list[tuple[int, ...]]:
    """Greedy maximal family of vertex-disjoint subdivided triangles.

    Each 6-cycle is ``(a, w_ab, b, w_bc, c, w_ca)`` with ``a, b`` adjacent grid
    vertices, ``c`` the V2 centre touching both, and ``w_*`` the inserted
    vertices on the three edges.
    """
    star_of = {eg.host[w]: w for w in eg.host}

    def mid(u, v):
        return star_of[(min(u, v), max(u, v))]

    taken = np.zeros(eg.n, dtype=bool)
    cycles = []
    for c in np.flatnonzero(eg.vclass == V2):
        cx, cy = eg.coords[c]
        corners = {}
        for w in eg.adj[c]:
            (corner,) = [v for v in eg.host[w] if v != c]
            corners[(eg.coords[corner, 0] > cx, eg.coords[corner, 1] > cy)] = corner
        tl, tr = corners[(False, False)], corners[(True, False)]
        bl, br = corners[(False, True)], corners[(True, True)]
        for a, b in ((tl, tr), (tr, br), (bl, br), (tl, bl)):
            cyc = (a, mid(a, b), b, mid(b, c), int(c), mid(c, a))
            if not taken[list(cyc)].any():
                taken[list(cyc)] = True
                cycles.append(tuple(int(v) for v in cyc))
                break
    return cycles
