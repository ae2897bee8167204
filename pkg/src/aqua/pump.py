"""Staged pumping along a half-line with extra neighbours.

The strategy is built in SAD space.  Starting from unit mass at the first
spine vertex, stage ``k`` sweeps the path ``v_1 .. v_f, u`` (``f = f(N_k)``,
``u = u_{N_k}``, an extra neighbour with initial level ``>= 1 - eps``) with
``mu = 1/2`` until ``u`` holds at least ``R / (f + 2)`` of the mass ``R``
still on the spine.  ``u`` is then frozen and never touched again.  Hence
after ``m`` stages

    1 - captured <= prod_k (1 - 1/(f(N_k) + 2)) <= exp(-sum_k 1/(f(N_k) + 2)).

The SAD schedule is turned into water moves by reversal and replayed on the
initial profile.  Because a stage can need ~1e7 moves, schedules are stored
as :class:`SweepBlock` runs and replayed with a compiled kernel.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numba
import numpy as np

from .dynamics import Move, fmt
from .errors import ContractViolation, InvalidSpecError, StageConvergenceError
from .graph import Graph

MU = 0.5
DEFAULT_STAGE_BUDGET = 1_000_000


@numba.njit(cache=True, nogil=True)
def _sweep_until(x, path, mu, target, max_sweeps):
    # forward sweeps along consecutive pairs of `path`; stop once the last
    # vertex reaches `target`. Returns the sweep count, or -1 on budget.
    last = path[path.shape[0] - 1]
    if x[last] >= target:
        return 0
    for s in range(1, max_sweeps + 1):
        for i in range(path.shape[0] - 1):
            a = x[path[i]]
            b = x[path[i + 1]]
            d = mu * (b - a)
            x[path[i]] = a + d
            x[path[i + 1]] = b - d
        if x[last] >= target:
            return s
    return -1


@numba.njit(cache=True, nogil=True)
def _sweep_n(x, path, mu, n_sweeps, reverse):
    L = path.shape[0]
    for _ in range(n_sweeps):
        if reverse:
            for i in range(L - 2, -1, -1):
                a = x[path[i]]
                b = x[path[i + 1]]
                d = mu * (b - a)
                x[path[i]] = a + d
                x[path[i + 1]] = b - d
        else:
            for i in range(L - 1):
                a = x[path[i]]
                b = x[path[i + 1]]
                d = mu * (b - a)
                x[path[i]] = a + d
                x[path[i + 1]] = b - d


@dataclass(frozen=True)
class SweepBlock:
    """``sweeps`` repetitions of the moves along consecutive pairs of ``path``.

    ``reverse=True`` runs each sweep from the far end backwards, which is
    exactly the time reversal of a forward block.
    """

    path: tuple[int, ...]
    sweeps: int
    mu: float = MU
    reverse: bool = False

    def moves(self) -> Iterator[Move]:
        pairs = list(zip(self.path[:-1], self.path[1:]))
        if self.reverse:
            pairs = pairs[::-1]
        for _ in range(self.sweeps):
            for a, b in pairs:
                yield Move(a, b, self.mu)

    def dual(self) -> "SweepBlock":
        return SweepBlock(self.path, self.sweeps, self.mu, not self.reverse)

    def __len__(self) -> int:
        return self.sweeps * (len(self.path) - 1)

    def apply_inplace(self, x: np.ndarray) -> None:
        _sweep_n(x, np.asarray(self.path, dtype=np.int64), self.mu, self.sweeps, self.reverse)


def dual_blocks(blocks: Sequence[SweepBlock]) -> list[SweepBlock]:
    return [b.dual() for b in reversed(blocks)]


def expand(blocks: Sequence[SweepBlock]) -> list[Move]:
    return [m for b in blocks for m in b.moves()]


def replay(blocks: Sequence[SweepBlock], p: np.ndarray) -> np.ndarray:
    x = np.array(p, dtype=float)
    for b in blocks:
        b.apply_inplace(x)
    return x


def select_indices(extra_levels: Sequence[float], eps: float) -> list[int]:
    """1-based indices ``n`` with ``extra_levels[n-1] >= 1 - eps``."""
    lv = np.asarray(extra_levels, dtype=float)
    return [int(i) + 1 for i in np.flatnonzero(lv >= 1.0 - eps)]


def product_bound(f_values: Sequence[int]) -> tuple[float, float]:
    """``(prod (1 - 1/(f+2)), exp(-sum 1/(f+2)))``; the first never exceeds the second."""
    f = np.asarray(f_values, dtype=float)
    if np.any(f < 1):
        raise InvalidSpecError("f values must be >= 1")
    x = 1.0 / (f + 2.0)
    prod = float(np.prod(1.0 - x))
    expo = float(np.exp(-x.sum()))
    if prod > expo * (1 + 1e-12):
        raise ContractViolation(f"product {prod} exceeds exponential bound {expo}")
    return prod, expo


@dataclass
class PumpReport:
    selected_indices: list = field(default_factory=list)
    f_values: list = field(default_factory=list)
    stage_masses: list = field(default_factory=list)
    stage_sweeps: list = field(default_factory=list)
    skipped_indices: list = field(default_factory=list)
    product_bound: float = 1.0
    exp_bound: float = 1.0
    final_level: float = 0.0
    sad_level: float = 0.0
    total_mass_captured: float = 0.0
    n_moves: int = 0

    def to_dict(self) -> dict:
        return {
            "selected_indices": list(self.selected_indices),
            "f_values": list(self.f_values),
            "stage_masses": [float(x) for x in self.stage_masses],
            "stage_sweeps": list(self.stage_sweeps),
            "skipped_indices": list(self.skipped_indices),
            "product_bound": self.product_bound,
            "exp_bound": self.exp_bound,
            "final_level": self.final_level,
            "sad_level": self.sad_level,
            "total_mass_captured": self.total_mass_captured,
            "n_moves": self.n_moves,
        }

    def stage_rows(self):
        cum = 0.0
        prod = 1.0
        for k, (N, f, m) in enumerate(zip(self.selected_indices, self.f_values, self.stage_masses), start=1):
            cum += m
            prod *= 1.0 - 1.0 / (f + 2.0)
            yield k, N, f, m, cum, prod

    def stage_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "N_k", "f_N_k", "stage_mass", "cumulative_mass", "product_bound_so_far"])
        for k, N, f, m, cum, prod in self.stage_rows():
            w.writerow([k, N, f, fmt(m), fmt(cum), fmt(prod)])
        return buf.getvalue()


def pump_schedule(
    g: Graph,
    indices: Sequence[int],
    stage_budget: int = DEFAULT_STAGE_BUDGET,
) -> tuple[list[SweepBlock], np.ndarray, list[int], list[float], list[int], list[int]]:
    """Build the SAD schedule for the given 1-based extra-neighbour indices.

    Returns ``(blocks, xi, used, stage_masses, sweeps, skipped)``.
    """
    if g.family != "halfline":
        raise InvalidSpecError("pump strategy needs a graph from make_halfline")
    f_table = g.meta["f"]
    extras = g.meta["extras"]
    spine = g.meta["spine"]
    xi = np.zeros(g.n)
    xi[spine[0]] = 1.0
    blocks: list[SweepBlock] = []
    used, masses, sweeps, skipped = [], [], [], []
    remaining = 1.0
    for N in indices:
        if N < 1 or N > len(f_table):
            skipped.append(int(N))
            continue
        f = f_table[N - 1]
        u = extras[N - 1]
        path = np.array(spine[:f] + [u], dtype=np.int64)
        target = remaining / (f + 2.0)
        s = _sweep_until(xi, path, MU, target, stage_budget)
        if s < 0:
            raise StageConvergenceError(f"stage for index {N} (f={f}) missed {target} within {stage_budget} sweeps")
        if s:
            blocks.append(SweepBlock(tuple(int(x) for x in path), int(s)))
        m = float(xi[u])
        used.append(int(N))
        masses.append(m)
        sweeps.append(int(s))
        remaining -= m
    return blocks, xi, used, masses, sweeps, skipped


def run_pump(
    g: Graph,
    p0: np.ndarray,
    eps: float,
    *,
    stage_budget: int = DEFAULT_STAGE_BUDGET,
    check: bool = True,
) -> PumpReport:
    """Run the staged strategy from the first spine vertex and replay it."""
    if not 0.0 < eps <= 1.0:
        raise InvalidSpecError(f"eps must lie in (0, 1], got {eps}")
    if g.family != "halfline":
        raise InvalidSpecError("pump strategy needs a graph from make_halfline")
    p0 = np.asarray(p0, dtype=float)
    v = g.meta["spine"][0]
    extras = g.meta["extras"]
    indices = select_indices(p0[extras], eps)
    blocks, xi, used, masses, sweeps, skipped = pump_schedule(g, indices, stage_budget)
    f_used = [g.meta["f"][N - 1] for N in used]
    prod, expo = product_bound(f_used)
    water = replay(dual_blocks(blocks), p0)
    rep = PumpReport(
        selected_indices=used,
        f_values=f_used,
        stage_masses=masses,
        stage_sweeps=sweeps,
        skipped_indices=skipped,
        product_bound=prod,
        exp_bound=expo,
        final_level=float(water[v]),
        sad_level=float(np.dot(xi, p0)),
        total_mass_captured=float(sum(masses)),
        n_moves=sum(len(b) for b in blocks),
    )
    if check:
        check_report(rep, eps)
    return rep


def check_report(rep: PumpReport, eps: float, tol: float = 1e-9) -> None:
    if rep.total_mass_captured > 1.0 + tol:
        raise ContractViolation(f"captured mass {rep.total_mass_captured} exceeds 1")
    if 1.0 - rep.total_mass_captured > rep.product_bound + tol:
        raise ContractViolation(
            f"leakage {1.0 - rep.total_mass_captured} exceeds product bound {rep.product_bound}"
        )
    if abs(rep.final_level - rep.sad_level) > tol:
        raise ContractViolation(f"replayed level {rep.final_level} != SAD weighting {rep.sad_level}")
    if rep.final_level < (1.0 - eps) * rep.total_mass_captured - tol:
        raise ContractViolation(
            f"final level {rep.final_level} below (1-eps)*captured={(1 - eps) * rep.total_mass_captured}"
        )


def linear_f(mult: int) -> Callable[[int], int]:
    return lambda k: mult * k


def divergence_diagnostic(
    f: Callable[[np.ndarray], np.ndarray] | Sequence[int],
    eps: float,
    n_max: int,
    seed=None,
) -> np.ndarray:
    """Partial sums ``S_N = sum_{n<=N} Y_n / f(n)`` with ``Y_n ~ Bernoulli(eps)``.

    ``f`` is either an array of ``f(1..n_max)`` or a vectorised callable.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    n = np.arange(1, n_max + 1)
    fv = np.asarray(f(n) if callable(f) else f, dtype=float)[:n_max]
    if np.any(np.diff(fv) <= 0):
        raise InvalidSpecError("f must be strictly increasing")
    rng = np.random.default_rng(seed)
    y = rng.random(n_max) < eps
    return np.cumsum(y / fv)


def divergence_moments(f_values: np.ndarray, eps: float) -> tuple[float, float]:
    """Mean and standard deviation of ``S_N`` for the given ``f(1..N)``."""
    inv = 1.0 / np.asarray(f_values, dtype=float)
    return float(eps * inv.sum()), math.sqrt(eps * (1 - eps) * float(np.sum(inv ** 2)))
