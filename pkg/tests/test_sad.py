import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqua.dynamics import Move, balance
from aqua.errors import UnsupportedStructureError
from aqua.graph import Graph, induced_edges, make_comb, make_path, path_order
from aqua.sad import (
    check_cap,
    delta,
    dual_of,
    is_unimodal,
    mode_preserved,
    one_sided,
    run_sad,
    unimodal_rows,
    verify_duality,
)

from conftest import random_connected_graph


def random_moves(rng, g, T, mu_low=0.0):
    edges = g.edges
    out = []
    for _ in range(T):
        u, v = edges[rng.integers(len(edges))]
        out.append(Move(u, v, float(0.5 - rng.uniform(0, 0.5 - mu_low))))
    return out


def test_run_sad_empty():
    assert np.array_equal(run_sad(make_path(4), 2, []), delta(make_path(4), 2))


def test_run_sad_one_share():
    xi = run_sad(make_path(3), 1, [Move(1, 2, 0.5)])
    assert np.allclose(xi, [0, 0.5, 0.5])


def test_sad_balanced_window_uniform():
    g = make_path(9)
    window = [2, 3, 4, 5, 6]
    res = balance(delta(g, 4), window, induced_edges(g, window), 0.5, 1e-12, record=True)
    assert np.allclose(res.levels[window], 1 / 5, atol=1e-10)
    assert np.allclose(run_sad(g, 4, res.moves), res.levels, atol=1e-15)


def test_dual_of():
    m = [Move(0, 1, 0.5), Move(1, 2, 0.2), Move(0, 1, 0.1)]
    assert dual_of([]) == []
    assert dual_of(m) == m[::-1]
    assert dual_of(dual_of(m)) == m


def test_duality_trivial_cases():
    g = make_path(3)
    p0 = np.array([0.2, 0.9, 0.4])
    assert verify_duality(g, p0, 1, []) == (0.9, 0.9)
    lhs, rhs = verify_duality(g, p0, 0, [Move(0, 1, 0.5)])
    assert lhs == pytest.approx(0.55) and rhs == pytest.approx(0.55)


def test_duality_random(rng):
    for _ in range(200):
        n = int(rng.integers(2, 21))
        g = random_connected_graph(rng, n, int(rng.integers(0, n)))
        p0 = rng.random(n)
        v = int(rng.integers(n))
        lhs, rhs = verify_duality(g, p0, v, random_moves(rng, g, int(rng.integers(0, 51))))
        assert abs(lhs - rhs) <= 1e-10


def test_unimodal_examples():
    order = [0, 1, 2]
    assert is_unimodal([0, 1, 0], order)
    assert is_unimodal([0.2, 0.5, 0.3], order)
    assert not is_unimodal([0.4, 0.1, 0.5], order)
    rows = np.array([[0, 1, 0], [0.2, 0.5, 0.3], [0.4, 0.1, 0.5]])
    assert list(unimodal_rows(rows, order)) == [True, True, False]


def test_unimodal_needs_path():
    with pytest.raises(UnsupportedStructureError):
        path_order(make_comb(1, 3))


def test_cap_examples():
    g = make_path(4)
    assert check_cap(g, 1, delta(g, 1))
    assert check_cap(g, 1, run_sad(g, 1, [Move(1, 2, 0.5)]))
    assert not check_cap(g, 1, [0.0, 0.0, 0.6, 0.4])


def test_cap_rejects_cycles():
    cycle = Graph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))
    with pytest.raises(UnsupportedStructureError):
        check_cap(cycle, 0, delta(cycle, 0))


def test_one_sided_predicate():
    assert one_sided([Move(2, 3, 0.5), Move(3, 4, 0.5), Move(3, 2, 0.2)], 2)
    assert not one_sided([Move(2, 3, 0.5), Move(1, 2, 0.5)], 2)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 30), st.integers(0, 80), st.integers(0, 2**31))
def test_path_sad_structure(n, T, seed):
    rng = np.random.default_rng(seed)
    g = make_path(max(n, 2))
    v = int(rng.integers(g.n))
    moves = random_moves(rng, g, T)
    _, hist = run_sad(g, v, moves, trace=True)
    assert np.allclose(hist.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(hist >= 0)
    assert unimodal_rows(hist, path_order(g)).all()
    caps = 1.0 / (np.abs(np.arange(g.n) - v) + 1.0)
    assert np.all(hist <= caps + 1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(0, 60), st.integers(0, 2**31))
def test_tree_cap(n, T, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, 0)
    v = int(rng.integers(n))
    _, hist = run_sad(g, v, random_moves(rng, g, T), trace=True)
    assert all(check_cap(g, v, row) for row in hist)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 30), st.integers(0, 80), st.integers(0, 2**31))
def test_mode_preserved_one_sided(n, T, seed):
    rng = np.random.default_rng(seed)
    g = make_path(n)
    v = int(rng.integers(1, n - 1))
    side = v + 1 if rng.random() < 0.5 else v - 1
    allowed = [e for e in g.edges if v not in e or side in e]
    moves = [Move(*allowed[rng.integers(len(allowed))], float(rng.uniform(1e-6, 0.5))) for _ in range(T)]
    assert one_sided(moves, v)
    _, hist = run_sad(g, v, moves, trace=True)
    assert mode_preserved(hist, v)
