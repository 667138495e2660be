import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from mixtopo.graph import from_edges

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def record_criterion():
    def record(number, ok, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return record


@st.composite
def edge_lists(draw, min_n=2, max_n=12, directed=False):
    n = draw(st.integers(min_n, max_n))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    edges = draw(st.lists(pairs, max_size=3 * n))
    return n, edges, directed


@st.composite
def connected_graphs(draw, min_n=2, max_n=12):
    """Random spanning tree plus extra edges, so always connected."""
    n = draw(st.integers(min_n, max_n))
    parents = [draw(st.integers(0, v - 1)) for v in range(1, n)]
    edges = [(v, p) for v, p in zip(range(1, n), parents)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                          max_size=2 * n))
    return from_edges(n, edges + extra)


def path3():
    return from_edges(3, [(0, 1), (1, 2)])


def complete(n):
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n):
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def to_nx(g):
    import networkx as nx
    G = nx.DiGraph() if g.directed else nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(map(tuple, g.edges().tolist()))
    return G


def random_connected(n, p, seed):
    """Connected ER-style graph for oracle comparisons (tree + random edges)."""
    rng = np.random.default_rng(seed)
    edges = [(v, int(rng.integers(v))) for v in range(1, n)]
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    edges += list(zip(iu[0][keep], iu[1][keep]))
    return from_edges(n, edges)
