"""Shared graph fixtures."""

import numpy as np
import pytest

from gtcnn.graphs import cyclic_graph, graph_from_edges, line_graph, path_graph, sbm_generate
from gtcnn.linalg import clean
from gtcnn.models import Graph, GraphKind


def random_symmetric_graph(n: int, rng: np.random.Generator, density: float = 0.4) -> Graph:
    """Weighted undirected graph without self-loops."""
    weights = rng.uniform(0.2, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    upper = np.triu(weights, k=1)
    return Graph(clean(upper + upper.T), kind=GraphKind.SPATIAL, symmetric=True)


def scaled_symmetric_graph(n: int, rng: np.random.Generator) -> Graph:
    """Random symmetric graph with spectral radius one."""
    g = random_symmetric_graph(n, rng)
    radius = np.max(np.abs(np.linalg.eigvalsh(g.dense())))
    return Graph(clean(g.dense() / max(radius, 1e-12)), symmetric=True)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def edge_graph():
    """Two nodes joined by one undirected edge."""
    return graph_from_edges(2, [(0, 1, 1.0)], symmetric=True)


@pytest.fixture
def triangle():
    return graph_from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], symmetric=True)


@pytest.fixture
def small_sbm():
    graph, _ = sbm_generate(10, 2, 0.8, 0.2, seed=3)
    return graph


@pytest.fixture
def line3():
    return line_graph(3)


@pytest.fixture
def cycle2():
    return cyclic_graph(2)


@pytest.fixture
def path3():
    return path_graph(3)
