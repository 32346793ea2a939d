import json

import numpy as np
import pytest

from app.fixtures import fixture_graph
from tests.helpers import matrix_graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_vertex():
    """Two loops at v, one edge v -> w"""
    return fixture_graph("ex8_1")


@pytest.fixture
def collection():
    return fixture_graph("ex8_4")


@pytest.fixture
def three_maximal():
    return fixture_graph("ex6_7")


@pytest.fixture
def single_loop():
    return matrix_graph([[1]], ["v"])


@pytest.fixture
def edgeless():
    return matrix_graph([[0, 0], [0, 0]], ["a", "b"])


@pytest.fixture
def graph_file(tmp_path):
    """Write a graph document (dict or raw text) to disk and return its path"""
    def write(document, name="graph.json"):
        path = tmp_path / name
        path.write_text(document if isinstance(document, str) else json.dumps(document))
        return str(path)

    return write
