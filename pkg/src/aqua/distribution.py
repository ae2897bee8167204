"""Random initial profiles, Monte Carlo laws of the optimum, reference CDFs.

Per-chunk random streams are spawned from the master seed with
:class:`numpy.random.SeedSequence`, so results do not depend on the number
of worker threads.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import Move, _move_inplace
from .errors import InvalidPreconditionError, UnsupportedStructureError
from .graph import Graph, path_order
from .optimizer import closed_form_vec_for, kappa_search

log = logging.getLogger(__name__)

CHUNK = 1 << 16


@dataclass(frozen=True)
class ProfileLaw:
    """Independent per-vertex level law.

    kind ``uniform01``: unif(0, 1).  ``bounded``: unif(0, C) with ``C <= 1``.
    ``point``: constant ``value``.  ``custom``: one ``(low, high)`` uniform
    interval per vertex.
    """

    kind: str = "uniform01"
    C: float = 1.0
    value: float = 0.5
    intervals: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform01", "bounded", "point", "custom"):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "bounded" and not 0 < self.C <= 1:
            raise ValueError("bounded law needs 0 < C <= 1")
        if self.kind == "point" and not 0 <= self.value <= 1:
            raise ValueError("point law value must lie in [0, 1]")
        for lo, hi in self.intervals:
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"interval {(lo, hi)} not inside [0, 1]")

    def sample(self, rng: np.random.Generator, size: tuple[int, int]) -> np.ndarray:
        if self.kind == "uniform01":
            return rng.random(size)
        if self.kind == "bounded":
            return self.C * rng.random(size)
        if self.kind == "point":
            return np.full(size, float(self.value))
        lo, hi = np.array(self.intervals, dtype=float).T
        if lo.shape[0] != size[1]:
            raise ValueError("custom law needs one interval per vertex")
        return lo + (hi - lo) * rng.random(size)


def sample_profile(g: Graph, law: ProfileLaw = ProfileLaw(), seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return law.sample(rng, (1, g.n))[0]


# -- reference CDFs ------------------------------------------------------------


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("CDF argument outside [0, 1]")
    return x


def cdf_edge(x):
    """CDF of the optimum at one end of a single edge, i.i.d. unif(0,1) levels."""
    x = _check_x(x)
    out = np.where(x <= 0.5, 1.5 * x ** 2, x - 0.5 * (1 - x) ** 2)
    return out if out.ndim else float(out)


PATH3_BREAKS = (Fraction(1, 3), Fraction(1, 2), Fraction(2, 3))
# cubic coefficients (c3, c2, c1, c0) per piece, lowest interval first
PATH3_PIECES = (
    (Fraction(8, 3), Fraction(0), Fraction(0), Fraction(0)),
    (Fraction(-11, 6), Fraction(9, 2), Fraction(-3, 2), Fraction(1, 6)),
    (Fraction(-23, 6), Fraction(13, 2), Fraction(-2), Fraction(1, 6)),
    (Fraction(2, 3), Fraction(-5, 2), Fraction(4), Fraction(-7, 6)),
)


# float evaluation re-expands each piece about a centre so that the last
# piece returns exactly 1.0 at x = 1
PATH3_CENTERS = (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1))


def _recentre(coeffs, c: Fraction) -> tuple[Fraction, ...]:
    c3, c2, c1, c0 = coeffs
    return (
        c3,
        3 * c3 * c + c2,
        3 * c3 * c * c + 2 * c2 * c + c1,
        ((c3 * c + c2) * c + c1) * c + c0,
    )


_PATH3_FLOAT = tuple(
    (float(c), tuple(float(a) for a in _recentre(p, c))) for p, c in zip(PATH3_PIECES, PATH3_CENTERS)
)


def path3_piece(i: int, x):
    c, (c3, c2, c1, c0) = _PATH3_FLOAT[i]
    y = x - c
    return ((c3 * y + c2) * y + c1) * y + c0


def path3_piece_exact(i: int, x: Fraction) -> Fraction:
    c3, c2, c1, c0 = PATH3_PIECES[i]
    return ((c3 * x + c2) * x + c1) * x + c0


def path3_continuity_gaps() -> list[float]:
    """|left piece - right piece| at each breakpoint, in floating point."""
    return [abs(path3_piece(i, float(b)) - path3_piece(i + 1, float(b))) for i, b in enumerate(PATH3_BREAKS)]


def cdf_path3_end(x):
    """CDF of the optimum at an end vertex of the 3-path, i.i.d. unif(0,1)."""
    x = _check_x(x)
    b1, b2, b3 = (float(b) for b in PATH3_BREAKS)
    out = np.select(
        [x <= b1, x <= b2, x <= b3],
        [path3_piece(0, x), path3_piece(1, x), path3_piece(2, x)],
        path3_piece(3, x),
    )
    return out if out.ndim else float(out)


# -- empirical CDFs ------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalCdf:
    samples: np.ndarray
    label: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float)))

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])

    def __call__(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def left(self, x):
        return np.searchsorted(self.samples, x, side="left") / self.n


def ks_distance(emp: EmpiricalCdf, ref: Callable) -> float:
    """sup |F_emp - F_ref|, evaluated on both sides of every jump."""
    x = np.unique(emp.samples)
    F = np.asarray(ref(x), dtype=float)
    return float(max(np.max(np.abs(emp(x) - F)), np.max(np.abs(emp.left(x) - F))))


def _chunk_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def mc_kappa_samples(
    g: Graph,
    v: int,
    trials: int,
    seed=0,
    law: ProfileLaw = ProfileLaw(),
    evaluator: Callable[[np.ndarray], np.ndarray] | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, str]:
    """Draw ``trials`` profiles and evaluate the optimum at ``v`` on each.

    ``evaluator`` maps an ``(N, n)`` block of profiles to ``N`` values.  When
    omitted the closed form is used if one exists, otherwise the lower bound
    from :func:`kappa_search` (label ``lower-bound``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    g.check_vertex(v)
    label = "exact"
    if evaluator is None:
        evaluator = closed_form_vec_for(g, v)
        if evaluator is None:
            label = "lower-bound"
            evaluator = search_evaluator(g, v)
    sizes = _chunk_sizes(trials)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(i):
        rng = np.random.default_rng(seqs[i])
        block = law.sample(rng, (sizes[i], g.n))
        try:
            return np.asarray(evaluator(block), dtype=float)
        except Exception as exc:
            raise RuntimeError(f"evaluator failed in trial block starting at {i * CHUNK}") from exc

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    return np.concatenate(parts), label


def mc_kappa_cdf(g: Graph, v: int, trials: int, seed=0, **kw) -> EmpiricalCdf:
    samples, label = mc_kappa_samples(g, v, trials, seed, **kw)
    return EmpiricalCdf(samples, label)


def search_evaluator(g: Graph, v: int, **search_kw) -> Callable[[np.ndarray], np.ndarray]:
    def ev(block: np.ndarray) -> np.ndarray:
        return np.array([kappa_search(g, row, v, **search_kw).lower for row in block])

    return ev


def reference_cdf_for(g: Graph, v: int):
    """Known closed-form CDF for i.i.d. unif(0,1) levels, else ``None``."""
    if g.family == "path" and g.n == 2:
        return cdf_edge
    if g.family == "path" and g.n == 3 and v in (0, 2):
        return cdf_path3_end
    return None


# -- flatness and the stuck band ---------------------------------------------------


def window_averages(levels: np.ndarray, pos: int) -> np.ndarray:
    """Matrix ``W[m, n]`` of averages over positions ``pos-m .. pos+n``."""
    x = np.asarray(levels, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    m = np.arange(pos + 1)[:, None]
    n = np.arange(x.shape[0] - pos)[None, :]
    return (c[pos + n + 1] - c[pos - m]) / (m + n + 1)


def is_two_sided_flat(g: Graph, p, v: int, eps: float) -> bool:
    """Every window average containing ``v`` lies in ``[1/2 - eps, 1/2 + eps]``.

    Only windows inside the finite truncation are checked.
    """
    order = path_order(g)
    pos = order.index(v)
    W = window_averages(np.asarray(p, dtype=float)[order], pos)
    return bool(np.all(np.abs(W - 0.5) <= eps + 1e-12))


def flat_profile(n: int, v: int, eps: float, kind: str = "ramp") -> np.ndarray:
    """Deterministic profile on a path of ``n`` vertices that is flat at ``v``.

    ``alternating``: ``1/2 +- eps`` with the sign flipping at every step
    away from ``v`` (``v`` itself at 1/2).  ``ramp``: alternating signs with
    amplitude growing as ``eps * d / 2`` at distance ``d`` (capped at 1/2),
    so far vertices reach 0 and 1 while every window containing ``v`` stays
    within ``eps`` of 1/2.
    """
    d = np.abs(np.arange(n) - v)
    sign = np.where(d % 2 == 1, -1.0, 1.0)
    if kind == "alternating":
        amp = np.full(n, float(eps))
    elif kind == "ramp":
        amp = np.minimum(0.5, eps * d / 2.0)
    else:
        raise ValueError(f"unknown flat profile kind {kind!r}")
    amp[v] = 0.0
    return 0.5 + sign * amp


def sample_flat_profile(g: Graph, v: int, eps: float, seed=None, max_tries: int = 10_000,
                        law: ProfileLaw = ProfileLaw()) -> np.ndarray:
    """Rejection sampler for flat profiles (rarely succeeds on long paths)."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        p = law.sample(rng, (1, g.n))[0]
        if is_two_sided_flat(g, p, v, eps):
            return p
    raise InvalidPreconditionError(f"no flat profile found in {max_tries} draws")


@dataclass
class StuckBandResult:
    max_deviation: float
    min_level: float
    max_level: float
    moves: int
    margin: int


def stuck_band_experiment(
    g: Graph,
    p,
    v: int,
    eps: float,
    adversary_moves: int,
    seed=None,
    margin: int | None = None,
) -> StuckBandResult:
    """Apply random interior moves and track the level at ``v``.

    Moves use random edges at distance ``>= margin`` (default a quarter of
    the path) from both ends and ``mu ~ unif(0, 1/2]``.
    """
    order = path_order(g)
    p = np.array(p, dtype=float)
    if not is_two_sided_flat(g, p, v, eps):
        raise InvalidPreconditionError("profile is not two-sidedly flat at v")
    L = len(order)
    if margin is None:
        margin = L // 4
    lo, hi = margin, L - 1 - margin  # usable positions
    interior = [(order[i], order[i + 1]) for i in range(lo, hi)]
    if not interior and adversary_moves:
        raise InvalidPreconditionError("margin leaves no interior edges")
    rng = np.random.default_rng(seed)
    levels = [p[v]]
    if adversary_moves:
        picks = rng.integers(0, len(interior), adversary_moves)
        mus = 0.5 * (1.0 - rng.random(adversary_moves))  # (0, 1/2]
        for k, mu in zip(picks, mus):
            a, b = interior[k]
            _move_inplace(p, a, b, mu)
            if a == v or b == v:
                levels.append(p[v])
    levels = np.asarray(levels)
    return StuckBandResult(
        float(np.max(np.abs(levels - 0.5))), float(levels.min()), float(levels.max()), adversary_moves, margin
    )
