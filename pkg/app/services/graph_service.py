import heapq
import itertools
import json
import logging
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import ValidationError

from app.errors import DuplicateLabelError, GraphParseError, NegativeCountError, UnknownVertexError
from app.models import (
    Component,
    ComponentDecomposition,
    Edge,
    GraphDocument,
    MultiGraph,
    Path,
    check_adjacency,
)

logger = logging.getLogger(__name__)


def tarjan(vertices: Iterable[Hashable], neighbours: Callable[[Hashable], Iterable[Hashable]]) -> Iterator[Set[Hashable]]:
    """
    Yield the strongly connected components of the graph, sinks first.

    vertices: sequence of hashable vertices.
    neighbours: function giving the out-neighbours of a vertex.
    """
    indices = itertools.count()
    stack: List[Hashable] = []
    on_stack: Set[Hashable] = set()
    index: Dict[Hashable, int] = {}
    lowlink: Dict[Hashable, int] = {}

    def visit(v):
        index[v] = lowlink[v] = next(indices)
        stack.append(v)
        on_stack.add(v)
        return v, iter(neighbours(v))

    for root in vertices:
        if root in index:
            continue
        work = [visit(root)]
        while work:
            v, children = work[-1]
            for w in children:
                if w not in index:
                    work.append(visit(w))
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    lowlink[parent] = min(lowlink[parent], lowlink[v])
                if lowlink[v] == index[v]:
                    scc = set()
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        scc.add(w)
                        if w == v:
                            break
                    yield scc


def exact_matrix_power(base: np.ndarray, k: int) -> np.ndarray:
    """Integer matrix power by repeated squaring on an object array (no overflow)"""
    n = base.shape[0]
    result = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            result[i, j] = 1 if i == j else 0
    square = base
    while k > 0:
        if k & 1:
            result = result @ square
        k >>= 1
        if k:
            square = square @ square
    return result


class GraphService:
    """Graph parsing, component machinery and path counting"""

    # Parsing

    def parse_graph(self, text: str) -> MultiGraph:
        """Parse a graph given as JSON (matrix or edge list) or as a plain adjacency matrix"""
        stripped = text.strip()
        if not stripped:
            raise GraphParseError("empty graph input", field="input")
        if stripped[0] not in "{[":
            return self._parse_plain_matrix(stripped)

        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise GraphParseError(f"invalid JSON: {e.msg} (line {e.lineno})", field="input")
        if isinstance(raw, list):
            raw = {"vertices": [f"v{i}" for i in range(len(raw))], "matrix": raw}
        try:
            document = GraphDocument.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or "input"
            raise GraphParseError(first["msg"], field=field)
        return self.graph_from_document(document)

    def graph_from_document(self, document: GraphDocument) -> MultiGraph:
        labels = list(document.vertices)
        if document.matrix is not None and document.edges is not None:
            raise GraphParseError("give either 'matrix' or 'edges', not both", field="matrix")
        if document.matrix is not None:
            check_adjacency(labels, document.matrix)
            return MultiGraph(vertex_labels=tuple(labels), adjacency=tuple(tuple(row) for row in document.matrix))
        if document.edges is None:
            raise GraphParseError("missing 'matrix' or 'edges'", field="matrix")

        check_adjacency(labels, [[0] * len(labels) for _ in labels])
        position = {label: i for i, label in enumerate(labels)}
        counts = [[0] * len(labels) for _ in labels]
        aliases: Dict[str, str] = {}
        for k, spec in enumerate(document.edges):
            if spec.source not in position:
                raise UnknownVertexError(f"unknown vertex '{spec.source}'", field=f"edges[{k}].from")
            if spec.target not in position:
                raise UnknownVertexError(f"unknown vertex '{spec.target}'", field=f"edges[{k}].to")
            if spec.count < 0:
                raise NegativeCountError(f"edge count {spec.count} is negative", field=f"edges[{k}].count")
            i, j = position[spec.source], position[spec.target]

            user_labels: List[str] = []
            if spec.labels is not None:
                user_labels = list(spec.labels)
            elif spec.label is not None:
                user_labels = [spec.label]
            if user_labels and len(user_labels) != spec.count:
                raise GraphParseError(
                    f"{len(user_labels)} labels given for {spec.count} edges", field=f"edges[{k}].labels"
                )
            for offset, alias in enumerate(user_labels):
                if alias in aliases:
                    raise GraphParseError(f"duplicate edge label '{alias}'", field=f"edges[{k}].labels")
                aliases[alias] = f"{spec.source}->{spec.target}#{counts[i][j] + offset}"
            counts[i][j] += spec.count

        return MultiGraph(
            vertex_labels=tuple(labels),
            adjacency=tuple(tuple(row) for row in counts),
            edge_labels=aliases,
        )

    def _parse_plain_matrix(self, text: str) -> MultiGraph:
        rows: List[List[int]] = []
        for i, line in enumerate(l for l in text.splitlines() if l.strip()):
            row = []
            for j, token in enumerate(line.replace(",", " ").split()):
                try:
                    row.append(int(token))
                except ValueError:
                    raise GraphParseError(f"'{token}' is not an integer", field=f"matrix[{i}][{j}]")
            rows.append(row)
        labels = [f"v{i}" for i in range(len(rows))]
        check_adjacency(labels, rows)
        return MultiGraph(vertex_labels=tuple(labels), adjacency=tuple(tuple(r) for r in rows))

    def serialize_graph(self, g: MultiGraph) -> Dict[str, object]:
        """Matrix-form JSON document"""
        document: Dict[str, object] = {
            "vertices": list(g.vertex_labels),
            "matrix": [list(row) for row in g.adjacency],
        }
        if g.edge_labels:
            document["edge_labels"] = dict(sorted(g.edge_labels.items()))
        return document

    # Edges and paths

    def edges(self, g: MultiGraph) -> List[Edge]:
        return [
            Edge(source=i, range=j, index=k)
            for i in range(g.n)
            for j in range(g.n)
            for k in range(g.adjacency[i][j])
        ]

    def out_edges(self, g: MultiGraph, v: int) -> List[Edge]:
        return [Edge(source=v, range=j, index=k) for j in range(g.n) for k in range(g.adjacency[v][j])]

    def edge_id(self, g: MultiGraph, edge: Edge) -> str:
        return f"{g.vertex_labels[edge.source]}->{g.vertex_labels[edge.range]}#{edge.index}"

    def edge_from_id(self, g: MultiGraph, ident: str) -> Edge:
        canonical = g.edge_labels.get(ident, ident)
        try:
            ends, index = canonical.rsplit("#", 1)
            source, target = ends.split("->", 1)
            edge = Edge(source=g.index_of(source), range=g.index_of(target), index=int(index))
        except ValueError:
            raise UnknownVertexError(f"unknown edge '{ident}'", field="edge")
        if edge.index >= g.adjacency[edge.source][edge.range] or edge.index < 0:
            raise UnknownVertexError(f"unknown edge '{ident}'", field="edge")
        return edge

    def path_from_ids(self, g: MultiGraph, ids: Sequence[str], start: Optional[int] = None) -> Path:
        """Build a path from edge identifiers listed in traversal order"""
        edges = tuple(self.edge_from_id(g, ident) for ident in ids)
        if not edges:
            if start is None:
                raise GraphParseError("an empty path needs a vertex", field="vertex")
            return Path(start=start)
        try:
            return Path(start=edges[0].source, edges=edges)
        except ValidationError:
            raise GraphParseError(f"edges {list(ids)} do not compose to a path", field="path")

    # Components

    def scc_decompose(self, g: MultiGraph) -> ComponentDecomposition:
        """Strongly connected components, topologically ordered (ties by smallest vertex index)"""
        n = g.n
        neighbours = lambda v: [j for j in range(n) if g.adjacency[v][j] > 0]
        groups = [tuple(sorted(scc)) for scc in tarjan(range(n), neighbours)]

        group_of = {}
        for k, group in enumerate(groups):
            for v in group:
                group_of[v] = k
        arcs: Set[Tuple[int, int]] = set()
        for i in range(n):
            for j in range(n):
                if g.adjacency[i][j] > 0 and group_of[i] != group_of[j]:
                    arcs.add((group_of[i], group_of[j]))

        # Kahn's algorithm keyed by the smallest vertex of each component
        indegree = [0] * len(groups)
        for _, r in arcs:
            indegree[r] += 1
        ready = [(groups[k][0], k) for k in range(len(groups)) if indegree[k] == 0]
        heapq.heapify(ready)
        ordered: List[int] = []
        while ready:
            _, k = heapq.heappop(ready)
            ordered.append(k)
            for s, r in sorted(arcs):
                if s == k:
                    indegree[r] -= 1
                    if indegree[r] == 0:
                        heapq.heappush(ready, (groups[r][0], r))

        position = {k: new for new, k in enumerate(ordered)}
        components = []
        for new, k in enumerate(ordered):
            vertices = groups[k]
            is_zero = len(vertices) == 1 and g.adjacency[vertices[0]][vertices[0]] == 0
            is_sink = not any(s == k for s, _ in arcs)
            components.append(Component(index=new, vertices=vertices, is_zero=is_zero, is_sink=is_sink))

        decomposition = ComponentDecomposition(
            components=tuple(components),
            order=tuple(v for c in components for v in c.vertices),
            vertex_component=tuple(position[group_of[v]] for v in range(n)),
            condensation=tuple(sorted((position[s], position[r]) for s, r in arcs)),
        )
        logger.debug("decomposed %d vertices into %d components", n, decomposition.m)
        return decomposition

    def reachable_vertices(self, g: MultiGraph, start: Iterable[int]) -> FrozenSet[int]:
        """All vertices at the end of a path of length >= 0 from `start`"""
        seen = set(start)
        frontier = list(seen)
        while frontier:
            v = frontier.pop()
            for j in range(g.n):
                if g.adjacency[v][j] > 0 and j not in seen:
                    seen.add(j)
                    frontier.append(j)
        return frozenset(seen)

    def reachable_component_set(
        self,
        dec: ComponentDecomposition,
        vertex: Optional[int] = None,
        component: Optional[int] = None,
    ) -> FrozenSet[int]:
        """Components communicated by a vertex or by a component (its own component included)"""
        if (vertex is None) == (component is None):
            raise ValueError("give exactly one of vertex or component")
        root = dec.vertex_component[vertex] if vertex is not None else component
        seen = {root}
        frontier = [root]
        while frontier:
            s = frontier.pop()
            for r in dec.successors(s):
                if r not in seen:
                    seen.add(r)
                    frontier.append(r)
        return frozenset(seen)

    def submatrix(self, g: MultiGraph, vertices: Sequence[int]) -> MultiGraph:
        return MultiGraph(
            vertex_labels=tuple(g.vertex_labels[v] for v in vertices),
            adjacency=tuple(tuple(g.adjacency[i][j] for j in vertices) for i in vertices),
        )

    def communicating_graph(self, g: MultiGraph, dec: ComponentDecomposition, s: int) -> MultiGraph:
        """H_s: the restriction of g to G_s and everything it communicates with, G_s first"""
        reached = sorted(self.reachable_component_set(dec, component=s))
        vertices = [v for r in reached for v in dec.components[r].vertices]
        return self.submatrix(g, vertices)

    def sources(self, g: MultiGraph) -> FrozenSet[int]:
        """Vertices receiving no edge (zero adjacency column), i.e. the kernel of the left action"""
        return frozenset(j for j in range(g.n) if all(g.adjacency[i][j] == 0 for i in range(g.n)))

    def j_vertices(self, g: MultiGraph) -> FrozenSet[int]:
        return frozenset(range(g.n)) - self.sources(g)

    def sinks(self, g: MultiGraph) -> FrozenSet[int]:
        """Vertices emitting no edge"""
        return frozenset(i for i in range(g.n) if sum(g.adjacency[i]) == 0)

    def ideal_i_vertices(self, g: MultiGraph, dec: ComponentDecomposition) -> FrozenSet[int]:
        """Vertices that no cycle reaches, so long enough paths never end there"""
        cyclic = [v for c in dec.components if not c.is_zero for v in c.vertices]
        return frozenset(range(g.n)) - self.reachable_vertices(g, cyclic)

    # Path counting

    def path_count_matrix(self, g: MultiGraph, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("path length must be nonnegative")
        return exact_matrix_power(g.exact_matrix, k)

    def count_paths(self, g: MultiGraph, k: int, source: Optional[int] = None, target: Optional[int] = None) -> int:
        """Exact number of paths of length k, optionally pinned at either end"""
        power = self.path_count_matrix(g, k)
        rows = range(g.n) if source is None else [source]
        cols = range(g.n) if target is None else [target]
        return sum(int(power[i, j]) for i in rows for j in cols)


# Singleton instance
graph_service = GraphService()
