"""Finite simple graphs and the generators used throughout the package.

Vertices are dense integers ``0..n-1``.  Generators attach a ``meta`` dict
that maps the natural labels of each family (spine positions, twigs, extra
neighbours of a half-line) onto those indices.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidSizeError, InvalidSpecError, InvalidVertexError, UnsupportedStructureError


def _norm(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Immutable, connected, simple undirected graph."""

    n: int
    edges: tuple[tuple[int, int], ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSizeError(f"graph needs at least one vertex, got n={self.n}")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidVertexError(f"edge {(u, v)} references a vertex outside 0..{self.n - 1}")
            if u == v:
                raise InvalidSpecError(f"loop at vertex {u}")
            e = _norm(u, v)
            if e in seen:
                raise InvalidSpecError(f"duplicate edge {e}")
            seen.add(e)
        object.__setattr__(self, "edges", tuple(sorted(seen)))
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        object.__setattr__(self, "_edge_set", frozenset(self.edges))
        if len(self._bfs(0)) != self.n:
            raise InvalidSpecError("graph is not connected")

    # -- structure -------------------------------------------------------

    def neighbors(self, u: int) -> tuple[int, ...]:
        self.check_vertex(u)
        return self._adj[u]

    def degree(self, u: int) -> int:
        return len(self.neighbors(u))

    @property
    def max_degree(self) -> int:
        return max(len(a) for a in self._adj)

    @property
    def family(self) -> str:
        return self.meta.get("family", "custom")

    def has_edge(self, u: int, v: int) -> bool:
        return _norm(u, v) in self._edge_set

    def check_vertex(self, u) -> None:
        if not isinstance(u, (int, np.integer)) or not 0 <= u < self.n:
            raise InvalidVertexError(f"unknown vertex {u!r} (graph has {self.n} vertices)")

    def is_tree(self) -> bool:
        return len(self.edges) == self.n - 1

    def is_path(self) -> bool:
        return self.is_tree() and self.max_degree <= 2

    def _bfs(self, source: int) -> dict[int, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in self._adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def distances_from(self, source: int) -> np.ndarray:
        """Breadth-first distances from ``source`` to every vertex."""
        self.check_vertex(source)
        dist = self._bfs(int(source))
        out = np.empty(self.n, dtype=np.int64)
        for k, d in dist.items():
            out[k] = d
        return out

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges], "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        return cls(int(data["n"]), tuple(tuple(e) for e in data["edges"]), dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def graph_distance(g: Graph, u: int, v: int) -> int:
    g.check_vertex(u)
    g.check_vertex(v)
    return int(g.distances_from(u)[v])


def path_order(g: Graph) -> list[int]:
    """Vertices of a path graph listed from one end to the other.

    For generated paths the order is ``0..n-1``; for other path-shaped
    graphs the walk starts at the lowest-numbered endpoint.
    """
    if not g.is_path():
        raise UnsupportedStructureError("graph is not a path")
    if g.n == 1:
        return [0]
    start = min(u for u in range(g.n) if g.degree(u) == 1)
    order = [start]
    prev = -1
    while len(order) < g.n:
        cur = order[-1]
        nxt = [w for w in g.neighbors(cur) if w != prev]
        prev = cur
        order.append(nxt[0])
    return order


# -- generators ------------------------------------------------------------


def make_path(n: int) -> Graph:
    if n < 1:
        raise InvalidSizeError(f"path length must be >= 1, got {n}")
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), {"family": "path"})


def make_comb(M: int, spine: int) -> Graph:
    """Path of ``spine`` vertices with a pendant twig at every ``M``-th one.

    Twig positions are 1-based spine positions ``M, 2M, ...``; the twig on
    position ``p`` is attached to vertex index ``p - 1``.
    """
    if M < 1 or spine < 1:
        raise InvalidSizeError(f"comb needs M >= 1 and spine >= 1, got M={M}, spine={spine}")
    edges = [(i, i + 1) for i in range(spine - 1)]
    positions = list(range(M, spine + 1, M))
    twigs = []
    for j, p in enumerate(positions):
        t = spine + j
        edges.append((p - 1, t))
        twigs.append(t)
    meta = {"family": "comb", "M": M, "spine": list(range(spine)), "teeth": positions, "twigs": twigs}
    return Graph(spine + len(positions), tuple(edges), meta)


@dataclass(frozen=True)
class HalfLineSpec:
    """Finite truncation of a half-line with extra neighbours.

    ``f_table[k-1]`` is the 1-based spine position carrying the ``k``-th
    extra neighbour.
    """

    spine_length: int
    f_table: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "f_table", tuple(int(x) for x in self.f_table))
        if self.spine_length < 1:
            raise InvalidSpecError(f"spine_length must be >= 1, got {self.spine_length}")
        prev = 0
        for k, fk in enumerate(self.f_table, start=1):
            if fk <= prev:
                raise InvalidSpecError(f"f must be strictly increasing; f({k})={fk} after {prev}")
            if fk > self.spine_length:
                raise InvalidSpecError(f"f({k})={fk} exceeds spine length {self.spine_length}")
            prev = fk

    @property
    def extra_count(self) -> int:
        return len(self.f_table)

    @classmethod
    def from_function(cls, f, spine_length: int, max_extras: int | None = None) -> "HalfLineSpec":
        """Tabulate ``f`` for k = 1, 2, ... while ``f(k)`` fits on the spine."""
        table = []
        k = 1
        while max_extras is None or k <= max_extras:
            fk = int(f(k))
            if fk > spine_length:
                break
            table.append(fk)
            k += 1
        return cls(spine_length, tuple(table))


def make_halfline(spec: HalfLineSpec) -> Graph:
    n = spec.spine_length
    edges = [(i, i + 1) for i in range(n - 1)]
    extras = []
    for k, fk in enumerate(spec.f_table):
        u = n + k
        edges.append((fk - 1, u))
        extras.append(u)
    meta = {
        "family": "halfline",
        "spine": list(range(n)),
        "f": list(spec.f_table),
        "extras": extras,
    }
    return Graph(n + len(extras), tuple(edges), meta)


def harmonic_diagnostic(spec: HalfLineSpec) -> np.ndarray:
    """Partial sums ``sum_{k<=K} 1/f(k)`` for K = 1..extra_count."""
    return np.cumsum(1.0 / np.asarray(spec.f_table, dtype=float)) if spec.f_table else np.zeros(0)


def make_custom(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    return Graph(n, tuple(tuple(e) for e in edges), {"family": "custom"})


def induced_edges(g: Graph, region: Iterable[int]) -> list[tuple[int, int]]:
    """Edges of ``g`` with both endpoints in ``region``, sorted."""
    A = set(region)
    return [e for e in g.edges if e[0] in A and e[1] in A]
