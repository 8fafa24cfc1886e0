import sys
import networkx as nx
import numpy as np
import pytest

from cat0probe import space_zoo
from cat0probe.metric_core import SpaceGraph


def to_networkx(g: SpaceGraph) -> nx.Graph:
    """Independent copy of ``g`` for oracle shortest-path computations."""
    G = nx.Graph()
    G.add_nodes_from(range(g.n_vertices))
    for a, b, w in zip(g.edge_a, g.edge_b, g.edge_len):
        G.add_edge(int(a), int(b), weight=float(w))
    return G


def binary_tree(depth: int) -> SpaceGraph:
    """Unit-edge rooted binary tree in heap order (children of v are 2v+1, 2v+2)."""
    n = 2 ** (depth + 1) - 1
    child = np.arange(1, n)
    return SpaceGraph(n, (child - 1) // 2, child, np.ones(n - 1), 1.0, "binary_tree")


@pytest.fixture(scope="session")
def grid():
    return space_zoo.build_euclidean_plane(60.0, 1.0)


@pytest.fixture(scope="session")
def small_grid():
    return space_zoo.build_euclidean_plane(20.0, 1.0)


@pytest.fixture(scope="session")
def tree():
    return space_zoo.build_regular_tree(3, 6)


@pytest.fixture(scope="session")
def hyper():
    return space_zoo.build_hyperbolic_plane(5.0, 0.25)


@pytest.fixture(scope="session")
def wedge():
    return space_zoo.build_plane_wedge(20.0, 1.0)


@pytest.fixture(scope="session")
def strip():
    return space_zoo.build_strip_glued_hyperbolic(5.0, 4.0, 0.25)


@pytest.fixture(scope="session")
def product():
    return space_zoo.build_tree_cross_line(3, 5, 8.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        # a criterion whose test raised or was deselected has no recorded line
        terminalreporter.write_line(mod.RESULTS.get(n, f"criterion {n}: FAIL - not evaluated (error or deselected)"))
