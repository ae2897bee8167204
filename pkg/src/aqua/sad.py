"""Sharing-a-drink: the dual unit-mass process.

Start with all mass at ``v`` and apply the same averaging rule as the water
moves.  Replaying a water move sequence backwards in SAD space gives the
weights with which the initial levels combine into the final level at ``v``:

    final_level(v) == sum_u sad(v, reversed(moves))[u] * initial[u]
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dynamics import Move, apply_sequence
from .errors import UnsupportedStructureError
from .graph import Graph

PLATEAU_TOL = 1e-12
CAP_TOL = 1e-10


def delta(g: Graph, v: int) -> np.ndarray:
    g.check_vertex(v)
    xi = np.zeros(g.n)
    xi[v] = 1.0
    return xi


def run_sad(g: Graph, v: int, updates: Sequence[Move], trace: bool = False):
    return apply_sequence(g, delta(g, v), updates, trace=trace)


def dual_of(moves: Sequence[Move]) -> list[Move]:
    return [Move(*m) for m in reversed(moves)]


def verify_duality(g: Graph, p0: np.ndarray, v: int, moves: Sequence[Move]) -> tuple[float, float]:
    """Return ``(final level at v, SAD-weighted initial levels)``."""
    lhs = float(apply_sequence(g, p0, moves)[v])
    xi = run_sad(g, v, dual_of(moves))
    rhs = float(np.dot(xi, np.asarray(p0, dtype=float)))
    return lhs, rhs


def is_unimodal(profile, order: Sequence[int], tol: float = PLATEAU_TOL) -> bool:
    """Weakly up to a single peak, then weakly down, along ``order``."""
    x = np.asarray(profile, dtype=float)[list(order)]
    d = np.diff(x)
    down = np.flatnonzero(d < -tol)
    if down.size == 0:
        return True
    return not np.any(d[down[0]:] > tol)


def unimodal_rows(history: np.ndarray, order: Sequence[int], tol: float = PLATEAU_TOL) -> np.ndarray:
    """Vectorised :func:`is_unimodal` over the rows of a trace."""
    d = np.diff(history[:, list(order)], axis=1)
    falling = d < -tol
    seen_fall = np.cumsum(falling, axis=1) > 0
    return ~np.any(seen_fall & (d > tol), axis=1)


def cap_vector(g: Graph, v: int) -> np.ndarray:
    """Per-vertex mass caps ``1 / (dist(v, w) + 1)``; trees only."""
    if not g.is_tree():
        raise UnsupportedStructureError("the 1/(d+1) cap is only established on paths and trees")
    return 1.0 / (g.distances_from(v) + 1.0)


def check_cap(g: Graph, v: int, profile, tol: float = CAP_TOL) -> bool:
    caps = cap_vector(g, v)
    return bool(np.all(np.asarray(profile, dtype=float) <= caps + tol))


def one_sided(moves: Sequence[Move], v: int) -> bool:
    """True when every move touching ``v`` uses the same neighbour of ``v``.

    This is the reading of "v only shares to one side" used for the
    mode-preservation check on paths.
    """
    partners = {m[1] if m[0] == v else m[0] for m in moves if v in (m[0], m[1])}
    return len(partners) <= 1


def mode_preserved(history: np.ndarray, v: int, tol: float = PLATEAU_TOL) -> bool:
    """``v`` attains the maximum of every row of a SAD trace."""
    return bool(np.all(history[:, v] >= history.max(axis=1) - tol))
