import math
from typing import Iterator, List, Optional, Sequence

import numpy as np

from app.models import MultiGraph

LOG2, LOG3 = math.log(2), math.log(3)


def matrix_graph(matrix, labels: Optional[Sequence[str]] = None) -> MultiGraph:
    labels = labels or [f"v{i}" for i in range(len(matrix))]
    return MultiGraph(
        vertex_labels=tuple(labels),
        adjacency=tuple(tuple(int(x) for x in row) for row in matrix),
    )


def random_matrix(rng: np.random.Generator, n: int, max_count: int = 2, density: float = 0.4) -> np.ndarray:
    counts = rng.integers(1, max_count + 1, size=(n, n))
    return np.where(rng.random((n, n)) < density, counts, 0)


def random_irreducible_matrix(rng: np.random.Generator, n: int, max_count: int = 2) -> np.ndarray:
    """Random counts on top of the cycle 0 -> 1 -> ... -> n-1 -> 0"""
    m = random_matrix(rng, n, max_count)
    for i in range(n):
        m[i, (i + 1) % n] = max(m[i, (i + 1) % n], 1)
    return m


def enumerate_paths(matrix: Sequence[Sequence[int]], start: int, length: int) -> Iterator[List[int]]:
    """Depth-first enumeration of paths as vertex sequences, one per choice of parallel edge"""
    if length == 0:
        yield [start]
        return
    for j, count in enumerate(matrix[start]):
        for _ in range(count):
            for rest in enumerate_paths(matrix, j, length - 1):
                yield [start] + rest
