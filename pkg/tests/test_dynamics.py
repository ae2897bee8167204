import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqua.dynamics import (
    Move,
    apply_move,
    apply_sequence,
    balance,
    energy,
    energy_delta,
    moves_from_json,
    moves_to_json,
    trace_csv,
)
from aqua.errors import InvalidMoveError, InvalidRegionError
from aqua.graph import induced_edges, make_path

from conftest import random_connected_graph

EDGE = make_path(2)
P3 = make_path(3)


def test_full_average():
    assert np.allclose(apply_move(EDGE, [0.2, 0.8], Move(0, 1, 0.5)), [0.5, 0.5])


def test_quarter_move():
    assert np.allclose(apply_move(EDGE, [0.0, 1.0], Move(0, 1, 0.25)), [0.25, 0.75])


def test_noop():
    p = np.array([0.3, 0.9])
    assert np.array_equal(apply_move(EDGE, p, Move(0, 1, 0.0)), p)


def test_not_an_edge():
    with pytest.raises(InvalidMoveError):
        apply_move(P3, [0, 0, 1], Move(0, 2, 0.5))


def test_mu_out_of_range():
    with pytest.raises(InvalidMoveError):
        apply_move(EDGE, [0, 1], Move(0, 1, 0.6))


def test_empty_sequence_identity():
    p = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(apply_sequence(P3, p, []), p)


def test_single_move_sequence():
    p = [0.1, 0.7, 0.3]
    m = Move(1, 2, 0.3)
    assert np.array_equal(apply_sequence(P3, p, [m]), apply_move(P3, p, m))


def test_three_path_witness():
    final, hist = apply_sequence(P3, [1, 0, 1], [Move(0, 1, 0.5), Move(1, 2, 0.5)], trace=True)
    assert np.allclose(final, [0.5, 0.75, 0.75])
    assert hist.shape == (3, 3) and np.allclose(hist[0], [1, 0, 1])


def test_energy_examples():
    assert energy(np.zeros(4)) == 0
    assert energy([1.0, 1.0], [0, 1]) == 2
    assert energy([0.2, 0.8], [0, 1]) == pytest.approx(0.68)


def _direct_delta(a, b, mu):
    before = a * a + b * b
    after = apply_move(EDGE, [a, b], Move(0, 1, mu))
    return before - float(after @ after)


def test_energy_delta_examples():
    assert energy_delta(0.4, 0.4, 0.3) == 0
    assert energy_delta(0.0, 1.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    # frozen from the direct oracle: 1 - (0.25**2 + 0.75**2)
    assert _direct_delta(0.0, 1.0, 0.25) == pytest.approx(0.375, abs=1e-15)
    assert energy_delta(0.0, 1.0, 0.25) == pytest.approx(0.375, abs=1e-15)


def test_energy_delta_grid():
    grid = np.round(np.arange(0, 1.01, 0.1), 10)
    mus = np.round(np.arange(0.05, 0.501, 0.05), 10)
    for a in grid:
        for b in grid:
            for mu in mus:
                assert abs(energy_delta(a, b, mu) - _direct_delta(a, b, mu)) <= 1e-12


def test_balance_pair():
    res = balance([0.2, 0.8], [0, 1], [(0, 1)], 0.5, 1e-12)
    assert res.sweeps == 1 and np.allclose(res.levels, [0.5, 0.5])


def test_balance_path3():
    levels, sweeps, _ = balance([1, 0, 0], [0, 1, 2], P3.edges, 0.5, 1e-9)
    assert np.all(np.abs(levels - 1 / 3) <= 3e-9)


def test_balance_singleton_and_outside():
    levels, sweeps, _ = balance([0.1, 0.9, 0.4], [2], [], 0.5, 1e-9)
    assert sweeps == 0 and np.allclose(levels, [0.1, 0.9, 0.4])
    levels, _, _ = balance([0.1, 0.9, 0.4], [0, 1], [(0, 1)], 0.5, 1e-9)
    assert levels[2] == 0.4


def test_balance_disconnected_region():
    with pytest.raises(InvalidRegionError):
        balance([0, 1, 0], [0, 1, 2], [(0, 1)], 0.5, 1e-9)


def test_balance_records_moves():
    res = balance([1, 0, 0], [0, 1, 2], P3.edges, 0.5, 1e-6, record=True)
    assert len(res.moves) == 2 * res.sweeps
    assert np.allclose(apply_sequence(P3, [1, 0, 0], res.moves), res.levels)


def test_serialization_and_trace():
    moves = [Move(0, 1, 0.5), Move(1, 2, 0.25)]
    assert moves_from_json(moves_to_json(moves)) == moves
    text = trace_csv(P3, [1, 0, 1], moves)
    lines = text.splitlines()
    assert lines[0] == "step,edge_u,edge_v,mu,level_u,level_v"
    assert lines[1] == "1,0,1,0.5,0.5,0.5"
    assert len(lines) == 3


def test_mass_conservation_many_moves(rng):
    g = random_connected_graph(rng, 15, 10)
    p = rng.random(g.n)
    edges = g.edges
    for _ in range(10_000):
        u, v = edges[rng.integers(len(edges))]
        q = apply_move(g, p, Move(u, v, float(rng.uniform(0, 0.5))))
        assert abs(q.sum() - p.sum()) <= 1e-12
        assert energy(q) <= energy(p) + 1e-15
        assert energy(q, [u, v]) <= energy(p, [u, v]) + 1e-15
        p = q
    assert np.all((p >= 0) & (p <= 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 6), st.integers(0, 2**31))
def test_balance_converges_to_mean(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, max(n, 1), extra) if n > 1 else make_path(1)
    p = rng.random(g.n)
    tol = 1e-9
    region = list(range(g.n))
    levels, sweeps, _ = balance(p, region, induced_edges(g, region), 0.5, tol, graph=g)
    assert np.all(np.abs(levels - p.mean()) <= g.n * tol)
