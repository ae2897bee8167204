import numpy as np
import pytest

from aqua.graph import Graph


def random_connected_graph(rng: np.random.Generator, n: int, extra: int) -> Graph:
    """Random spanning tree plus up to ``extra`` chords."""
    edges = set()
    for k in range(1, n):
        j = int(rng.integers(0, k))
        edges.add((j, k))
    for _ in range(extra):
        a, b = rng.choice(n, 2, replace=False)
        edges.add((min(a, b), max(a, b)))
    return Graph(n, tuple(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
