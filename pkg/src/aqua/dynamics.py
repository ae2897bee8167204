"""Pairwise averaging moves on water profiles.

A profile is a float array indexed by vertex.  A move ``(u, v, mu)`` opens
the pipe between ``u`` and ``v`` and moves a ``mu`` fraction of the level
difference, so with ``a, b`` the old levels::

    a' = a + mu * (b - a)
    b' = b + mu * (a - b)

``mu`` lives in ``[0, 1/2]``; ``mu = 0`` is an explicit no-op (used to pad
sequences to a common length).

The energy decrease of one move is ``2 mu (1 - mu) (b - a)**2``, obtained by
expanding the update directly.  A frequently quoted form ``2 mu**2 (b-a)**2``
agrees with it only at ``mu = 1/2``; see :func:`energy_delta`.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidMoveError, InvalidRegionError, NonConvergenceError
from .graph import Graph


class Move(NamedTuple):
    u: int
    v: int
    mu: float

    @property
    def edge(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


MoveSequence = list  # list[Move], chronological


def as_profile(levels, n: int | None = None, *, check_range: bool = True) -> np.ndarray:
    p = np.array(levels, dtype=float)
    if p.ndim != 1:
        raise ValueError("profile must be one-dimensional")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"profile has {p.shape[0]} entries, graph has {n} vertices")
    if check_range and (np.any(p < 0.0) or np.any(p > 1.0)):
        raise ValueError("water levels must lie in [0, 1]")
    return p


def check_move(g: Graph, m: Move) -> None:
    if not (0.0 <= m.mu <= 0.5):
        raise InvalidMoveError(f"mu={m.mu} outside [0, 1/2]")
    if not g.has_edge(m.u, m.v):
        raise InvalidMoveError(f"edge {(m.u, m.v)} is not in the graph")


def _move_inplace(p: np.ndarray, u: int, v: int, mu: float) -> None:
    a = p[u]
    b = p[v]
    d = mu * (b - a)
    p[u] = a + d
    p[v] = b - d


def apply_move(g: Graph, p: np.ndarray, m: Move) -> np.ndarray:
    """Return a new profile with ``m`` applied."""
    m = Move(*m)
    check_move(g, m)
    out = np.array(p, dtype=float)
    _move_inplace(out, m.u, m.v, m.mu)
    return out


def apply_sequence(g: Graph, p: np.ndarray, moves: Sequence[Move], trace: bool = False):
    """Left fold of :func:`apply_move`.

    With ``trace=True`` returns ``(final, history)`` where ``history`` has
    shape ``(T + 1, n)`` and row ``k`` is the profile after ``k`` moves.
    """
    moves = [Move(*m) for m in moves]
    for m in moves:
        check_move(g, m)
    cur = np.array(p, dtype=float)
    hist = np.empty((len(moves) + 1, cur.shape[0])) if trace else None
    if trace:
        hist[0] = cur
    for k, m in enumerate(moves, start=1):
        if m.mu:
            _move_inplace(cur, m.u, m.v, m.mu)
        if trace:
            hist[k] = cur
    return (cur, hist) if trace else cur


def energy(p: np.ndarray, region: Iterable[int] | None = None) -> float:
    p = np.asarray(p, dtype=float)
    if region is None:
        return float(np.dot(p, p))
    idx = np.fromiter(region, dtype=np.int64)
    return float(np.dot(p[idx], p[idx]))


def energy_delta(a: float, b: float, mu: float) -> float:
    """Energy removed by one move on levels ``a`` and ``b``.

    Direct expansion gives ``2 mu (1 - mu) (b - a)**2``; the tests check it
    against the before/after energies of :func:`apply_move`.
    """
    return 2.0 * mu * (1.0 - mu) * (b - a) ** 2


class BalanceResult(NamedTuple):
    levels: np.ndarray
    sweeps: int
    moves: list


def _check_region(region: set[int], region_edges: list[tuple[int, int]], g: Graph | None) -> None:
    for u, v in region_edges:
        if u not in region or v not in region:
            raise InvalidRegionError(f"edge {(u, v)} leaves the region")
        if g is not None and not g.has_edge(u, v):
            raise InvalidRegionError(f"edge {(u, v)} is not in the graph")
    # union-find connectivity of the region under region_edges
    parent = {u: u for u in region}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in region_edges:
        parent[find(u)] = find(v)
    if len({find(u) for u in region}) > 1:
        raise InvalidRegionError("region edges do not connect the region")


def balance(
    p: np.ndarray,
    region: Iterable[int],
    region_edges: Iterable[Sequence[int]],
    mu: float = 0.5,
    tol: float = 1e-9,
    *,
    graph: Graph | None = None,
    max_sweeps: int = 1_000_000,
    record: bool = False,
) -> BalanceResult:
    """Sweep the region's pipes in sorted order until every pipe is level.

    Stops once ``max |p[u] - p[v]| < tol`` over ``region_edges``.  Levels
    outside the region are untouched.  ``record=True`` keeps the moves.
    """
    A = set(int(u) for u in region)
    E = sorted({(min(u, v), max(u, v)) for u, v in region_edges})
    _check_region(A, E, graph)
    if not 0 < mu <= 0.5:
        raise InvalidMoveError(f"balancing needs mu in (0, 1/2], got {mu}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    cur = np.array(p, dtype=float)
    moves: list[Move] = []
    if not E:
        return BalanceResult(cur, 0, moves)
    us = np.array([e[0] for e in E])
    vs = np.array([e[1] for e in E])
    sweeps = 0
    while np.max(np.abs(cur[us] - cur[vs])) >= tol:
        if sweeps >= max_sweeps:
            raise NonConvergenceError(f"balance did not reach tol={tol} in {max_sweeps} sweeps")
        for u, v in E:
            _move_inplace(cur, u, v, mu)
            if record:
                moves.append(Move(u, v, mu))
        sweeps += 1
    return BalanceResult(cur, sweeps, moves)


# -- serialization -----------------------------------------------------------


def moves_to_json(moves: Sequence[Move]) -> str:
    return json.dumps([[int(m[0]), int(m[1]), float(m[2])] for m in moves])


def moves_from_json(text: str) -> list[Move]:
    return [Move(int(u), int(v), float(mu)) for u, v, mu in json.loads(text)]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


TRACE_HEADER = ("step", "edge_u", "edge_v", "mu", "level_u", "level_v")


def trace_rows(g: Graph, p0: np.ndarray, moves: Sequence[Move]):
    """Yield ``(step, u, v, mu, level_u, level_v)`` after each move."""
    cur = np.array(p0, dtype=float)
    for k, m in enumerate(moves, start=1):
        m = Move(*m)
        check_move(g, m)
        if m.mu:
            _move_inplace(cur, m.u, m.v, m.mu)
        yield (k, m.u, m.v, m.mu, cur[m.u], cur[m.v])


def trace_csv(g: Graph, p0: np.ndarray, moves: Sequence[Move]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for step, u, v, mu, lu, lv in trace_rows(g, p0, moves):
        w.writerow([step, u, v, fmt(mu), fmt(lu), fmt(lv)])
    return buf.getvalue()
