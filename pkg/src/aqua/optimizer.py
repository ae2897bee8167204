"""Bounds on the best achievable level at a target vertex.

Exact values are only available for the single edge and the three-vertex
path.  Everywhere else :func:`kappa_search` gives a certified lower bound (a
replayable witness) and :func:`kappa_upper_cap` gives an upper bound on trees
by combining the duality with the ``1/(d+1)`` mass cap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import Move, _move_inplace, apply_sequence
from .errors import InvalidSpecError, UnsupportedStructureError
from .graph import Graph
from .sad import cap_vector

log = logging.getLogger(__name__)

DEFAULT_MU_GRID = (0.5,)
REFINED_MU_GRID = tuple(k / 32 for k in range(1, 17))
QUANTUM = 1e-9


@dataclass
class KappaEstimate:
    lower: float
    witness: list = field(default_factory=list)
    upper: float = float("nan")
    upper_method: str = "trivial-max"
    exact: float | None = None
    partial: bool = False
    states_visited: int = 0

    @property
    def method(self) -> str:
        return "exact" if self.exact is not None else "search"

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "upper_method": self.upper_method,
            "exact": self.exact,
            "method": self.method,
            "partial": self.partial,
            "witness": [[int(m.u), int(m.v), float(m.mu)] for m in self.witness],
        }


def _check_level(*xs):
    for x in xs:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"level {x} outside [0, 1]")


def kappa_exact_edge(u1: float, u2: float) -> float:
    _check_level(u1, u2)
    return max(u1, 0.5 * (u1 + u2))


def kappa_exact_path3(levels: Sequence[float], target: int) -> float:
    """Closed form on the path 1-2-3; ``target`` is 1 (end) or 2 (middle)."""
    e1, e2, e3 = (float(x) for x in levels)
    _check_level(e1, e2, e3)
    if target == 1:
        return max(e1, (e1 + e2) / 2, (e1 + e2 + e3) / 3)
    if target == 2:
        return max(
            e2,
            (e1 + e2) / 2,
            (e2 + e3) / 2,
            e1 / 2 + (e2 + e3) / 4,
            e3 / 2 + (e1 + e2) / 4,
        )
    raise InvalidSpecError(f"target must be 1 or 2, got {target}")


def kappa_exact_edge_vec(p: np.ndarray) -> np.ndarray:
    """Row-wise :func:`kappa_exact_edge` for an ``(N, 2)`` array."""
    return np.maximum(p[:, 0], 0.5 * (p[:, 0] + p[:, 1]))


def kappa_exact_path3_vec(p: np.ndarray, target: int) -> np.ndarray:
    e1, e2, e3 = p[:, 0], p[:, 1], p[:, 2]
    if target == 1:
        return np.maximum.reduce([e1, (e1 + e2) / 2, (e1 + e2 + e3) / 3])
    if target == 2:
        return np.maximum.reduce(
            [e2, (e1 + e2) / 2, (e2 + e3) / 2, e1 / 2 + (e2 + e3) / 4, e3 / 2 + (e1 + e2) / 4]
        )
    raise InvalidSpecError(f"target must be 1 or 2, got {target}")


def greedy_cap_fill(levels: np.ndarray, caps: np.ndarray) -> float:
    """max sum(w * levels) s.t. sum(w) = 1, 0 <= w <= caps (fractional knapsack)."""
    order = np.argsort(-levels, kind="stable")
    remaining = 1.0
    total = 0.0
    for i in order:
        take = min(caps[i], remaining)
        total += take * levels[i]
        remaining -= take
        if remaining <= 0.0:
            break
    return float(total)


def kappa_upper_cap(g: Graph, p0: np.ndarray, v: int) -> float:
    """Upper bound on the supremum at ``v``; raises on non-trees."""
    caps = cap_vector(g, v)
    return greedy_cap_fill(np.asarray(p0, dtype=float), caps)


def _potential(levels: np.ndarray, caps: np.ndarray | None) -> float:
    if caps is None:
        return float(levels.max())
    return greedy_cap_fill(levels, caps)


def kappa_search(
    g: Graph,
    p0: np.ndarray,
    v: int,
    depth: int = 4,
    mu_grid: Sequence[float] = DEFAULT_MU_GRID,
    beam: int = 64,
    *,
    max_states: int = 5_000_000,
    use_cap: bool = True,
) -> KappaEstimate:
    """Beam search over move sequences of length ``<= depth``.

    Candidates are ranked by level at ``v`` plus the cap-bound potential of
    the current profile, then by the level itself, then by the move list
    (shorter first, lexicographic).  Profiles equal up to ``QUANTUM`` are
    merged.  If more than ``max_states`` children would be generated the
    search stops and the estimate is flagged ``partial``.
    """
    g.check_vertex(v)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if beam < 1:
        raise ValueError("beam must be >= 1")
    mu_grid = tuple(sorted(set(float(m) for m in mu_grid)))
    if not mu_grid or any(not 0.0 < m <= 0.5 for m in mu_grid):
        raise ValueError("mu_grid must be a non-empty subset of (0, 1/2]")
    p0 = np.array(p0, dtype=float)
    caps = None
    if use_cap:
        try:
            caps = cap_vector(g, v)
        except UnsupportedStructureError:
            caps = None

    best_level = float(p0[v])
    best_moves: tuple = ()
    frontier = [((), p0)]
    visited = 0
    partial = False
    seen = {np.round(p0 / QUANTUM).astype(np.int64).tobytes()}

    for _ in range(depth):
        if visited + len(frontier) * len(g.edges) * len(mu_grid) > max_states:
            partial = True
            log.warning("kappa_search stopped early: state budget %d exhausted", max_states)
            break
        children = []
        for moves, prof in frontier:
            for (a, b) in g.edges:
                if prof[a] == prof[b]:
                    continue
                for mu in mu_grid:
                    child = prof.copy()
                    _move_inplace(child, a, b, mu)
                    visited += 1
                    key = np.round(child / QUANTUM).astype(np.int64).tobytes()
                    if key in seen:
                        continue
                    seen.add(key)
                    cm = moves + (Move(a, b, mu),)
                    children.append((cm, child))
                    lv = float(child[v])
                    if lv > best_level:
                        best_level, best_moves = lv, cm
        if not children:
            break
        children.sort(
            key=lambda c: (-(c[1][v] + _potential(c[1], caps)), -c[1][v], len(c[0]), [tuple(m) for m in c[0]])
        )
        frontier = children[:beam]

    witness = list(best_moves)
    # the reported lower bound is the replayed value of the witness
    lower = float(apply_sequence(g, p0, witness)[v])
    if caps is not None:
        upper, method = greedy_cap_fill(p0, caps), "cap-greedy"
    else:
        upper, method = float(p0.max()), "trivial-max"
    upper = max(upper, lower)
    return KappaEstimate(lower, witness, upper, method, None, partial, visited)


def closed_form_for(g: Graph, v: int):
    """Return a closed-form evaluator ``f(levels) -> float`` if one exists.

    Covers the single edge (either end) and the 3-path (any vertex, using
    the mirror symmetry for the far end).
    """
    if g.family == "path" or g.is_path():
        if g.n == 2:
            w = 1 - v
            return lambda p: kappa_exact_edge(float(p[v]), float(p[w]))
        if g.n == 3 and g.family == "path":
            if v == 1:
                return lambda p: kappa_exact_path3(p, 2)
            if v == 0:
                return lambda p: kappa_exact_path3(p, 1)
            return lambda p: kappa_exact_path3(p[::-1], 1)
    return None


def closed_form_vec_for(g: Graph, v: int):
    """Vectorised variant of :func:`closed_form_for` over ``(N, n)`` arrays."""
    if g.family == "path" and g.n == 2:
        return lambda P: kappa_exact_edge_vec(P if v == 0 else P[:, ::-1])
    if g.family == "path" and g.n == 3:
        if v == 1:
            return lambda P: kappa_exact_path3_vec(P, 2)
        if v == 0:
            return lambda P: kappa_exact_path3_vec(P, 1)
        return lambda P: kappa_exact_path3_vec(P[:, ::-1], 1)
    return None
