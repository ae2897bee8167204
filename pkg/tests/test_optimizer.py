import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqua.dynamics import Move, apply_sequence
from aqua.errors import InvalidSpecError, UnsupportedStructureError
from aqua.graph import Graph, make_comb, make_path
from aqua.optimizer import (
    REFINED_MU_GRID,
    greedy_cap_fill,
    kappa_exact_edge,
    kappa_exact_path3,
    kappa_search,
    kappa_upper_cap,
)

from conftest import random_connected_graph

EDGE = make_path(2)
P3 = make_path(3)


def brute_force_best(g, p0, v, depth, grid):
    """Exhaustive enumeration of every sequence of <= depth moves."""
    best = p0[v]
    frontier = [np.asarray(p0, float)]
    for _ in range(depth):
        nxt = []
        for q in frontier:
            for (a, b), mu in itertools.product(g.edges, grid):
                r = q.copy()
                x, y = r[a], r[b]
                r[a], r[b] = x + mu * (y - x), y + mu * (x - y)
                nxt.append(r)
                best = max(best, r[v])
        frontier = nxt
    return best


def test_edge_closed_form_against_grid_oracle():
    grid = [k / 64 for k in range(1, 33)]
    oracle = brute_force_best(EDGE, [0.3, 0.9], 0, 3, grid)
    assert oracle == pytest.approx(0.6, abs=1e-12)
    assert kappa_exact_edge(0.3, 0.9) == pytest.approx(0.6)
    assert kappa_exact_edge(0.9, 0.3) == 0.9
    assert kappa_exact_edge(0.5, 0.5) == 0.5


def test_edge_out_of_range():
    with pytest.raises(ValueError):
        kappa_exact_edge(1.2, 0.3)


def test_path3_examples():
    assert kappa_exact_path3((0.9, 0.3, 0.6), 1) == pytest.approx(0.9)
    assert kappa_exact_path3((1, 0, 1), 2) == pytest.approx(0.75)
    assert kappa_exact_path3((0.2, 0.8, 0.8), 1) == pytest.approx(0.6)
    with pytest.raises(InvalidSpecError):
        kappa_exact_path3((0.1, 0.2, 0.3), 3)


def test_search_depth_zero():
    est = kappa_search(P3, [0.4, 0.9, 0.1], 0, depth=0)
    assert est.lower == 0.4 and est.witness == []


def test_search_edge():
    est = kappa_search(EDGE, [0.3, 0.9], 0, depth=2, mu_grid=[0.5])
    assert est.lower == pytest.approx(0.6)


def test_search_path3_middle():
    est = kappa_search(P3, [1, 0, 1], 1, depth=4, mu_grid=[0.5])
    assert est.lower >= 0.75 - 1e-10
    assert apply_sequence(P3, [1, 0, 1], est.witness)[1] == pytest.approx(est.lower, abs=1e-10)


def test_search_budget_flag():
    g = make_path(6)
    est = kappa_search(g, np.linspace(0, 1, 6), 0, depth=6, max_states=50)
    assert est.partial


def test_upper_cap_examples():
    assert kappa_upper_cap(make_path(1), [0.37], 0) == pytest.approx(0.37)
    assert kappa_upper_cap(P3, [0.2, 0.8, 0.8], 0) == pytest.approx(0.8 / 2 + 0.8 / 3 + 0.2 / 6)
    assert kappa_upper_cap(P3, [0.2, 0.8, 0.8], 0) == pytest.approx(0.7)
    assert kappa_upper_cap(P3, [0.9, 0.3, 0.6], 0) == pytest.approx(0.9)


def test_upper_cap_non_tree():
    cycle = Graph(3, ((0, 1), (1, 2), (0, 2)))
    with pytest.raises(UnsupportedStructureError):
        kappa_upper_cap(cycle, [0.1, 0.2, 0.3], 0)
    est = kappa_search(cycle, [0.1, 0.2, 0.9], 0, depth=2)
    assert est.upper_method == "trivial-max" and est.upper == 0.9


def test_greedy_cap_fill_against_lp():
    from scipy.optimize import linprog

    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        lv = rng.random(n)
        caps = rng.uniform(0.05, 1.0, n)
        caps[0] = 1.0
        res = linprog(-lv, A_eq=np.ones((1, n)), b_eq=[1.0], bounds=list(zip(np.zeros(n), caps)))
        assert greedy_cap_fill(lv, caps) == pytest.approx(-res.fun, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2), st.integers(0, 2**31))
def test_sandwich_and_witness(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, extra)
    p0 = rng.random(n)
    v = int(rng.integers(n))
    est = kappa_search(g, p0, v, depth=3, beam=16)
    assert p0[v] <= est.lower <= est.upper <= p0.max() + 1e-15
    assert apply_sequence(g, p0, est.witness)[v] == pytest.approx(est.lower, abs=1e-10)
    if g.is_tree():
        assert kappa_upper_cap(g, p0, v) >= est.lower - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_monotone_in_depth_and_grid(seed):
    # beam large enough that the search is exhaustive on the 3-path
    rng = np.random.default_rng(seed)
    p0 = rng.random(3)
    v = int(rng.integers(3))
    lows = [kappa_search(P3, p0, v, depth=d, beam=10_000).lower for d in range(5)]
    assert all(a <= b for a, b in zip(lows, lows[1:]))
    coarse = kappa_search(P3, p0, v, depth=3, mu_grid=[0.5], beam=10_000).lower
    fine = kappa_search(P3, p0, v, depth=3, mu_grid=[0.25, 0.5], beam=10_000).lower
    assert fine >= coarse


def test_search_matches_brute_force_on_comb():
    g = make_comb(2, 3)
    rng = np.random.default_rng(9)
    for _ in range(10):
        p0 = rng.random(g.n)
        est = kappa_search(g, p0, 0, depth=3, beam=10_000)
        assert est.lower == pytest.approx(brute_force_best(g, p0, 0, 3, [0.5]), abs=1e-9)


def test_refined_grid():
    assert REFINED_MU_GRID[0] == 1 / 32 and REFINED_MU_GRID[-1] == 0.5 and len(REFINED_MU_GRID) == 16
