import json

import numpy as np
import pytest

from app.errors import (
    DuplicateLabelError,
    GraphParseError,
    NegativeCountError,
    NonSquareMatrixError,
    UnknownVertexError,
)
from app.fixtures import fixture_graph
from app.models import GraphDocument
from app.services.graph_service import graph_service, tarjan
from tests.helpers import enumerate_paths, matrix_graph, random_matrix


class TestParsing:
    def test_edge_list_and_matrix_agree(self):
        edges = graph_service.parse_graph(json.dumps({
            "vertices": ["v", "w"],
            "edges": [{"from": "v", "to": "v", "count": 2}, {"from": "v", "to": "w", "count": 1}],
        }))
        matrix = graph_service.parse_graph(json.dumps({"vertices": ["v", "w"], "matrix": [[2, 1], [0, 0]]}))
        assert edges.adjacency == matrix.adjacency == ((2, 1), (0, 0))

    def test_plain_matrix_text(self):
        g = graph_service.parse_graph("2 1\n0 0\n")
        assert g.vertex_labels == ("v0", "v1")
        assert g.adjacency == ((2, 1), (0, 0))

    def test_bare_json_matrix(self):
        g = graph_service.parse_graph("[[0, 1], [1, 0]]")
        assert g.vertex_labels == ("v0", "v1")

    def test_serializer_emits_matrix_form(self, two_vertex):
        document = graph_service.serialize_graph(two_vertex)
        assert document == {"vertices": ["v", "w"], "matrix": [[2, 1], [0, 0]]}
        again = graph_service.parse_graph(json.dumps(document))
        assert again == two_vertex

    @pytest.mark.parametrize(
        "document, error, field",
        [
            ({"vertices": ["v", "v"], "matrix": [[0, 0], [0, 0]]}, DuplicateLabelError, "vertices"),
            ({"vertices": ["v"], "matrix": [[-1]]}, NegativeCountError, "matrix[0][0]"),
            ({"vertices": ["v", "w"], "matrix": [[0, 1]]}, NonSquareMatrixError, "matrix"),
            ({"vertices": ["v", "w"], "matrix": [[0, 1], [1]]}, NonSquareMatrixError, "matrix[1]"),
            ({"vertices": ["v"], "edges": [{"from": "v", "to": "x"}]}, UnknownVertexError, "edges[0].to"),
            ({"vertices": ["v"], "edges": [{"from": "v", "to": "v", "count": -2}]}, NegativeCountError, "edges[0].count"),
            ({"vertices": [], "matrix": []}, GraphParseError, "vertices"),
        ],
    )
    def test_errors_name_the_field(self, document, error, field):
        with pytest.raises(error) as info:
            graph_service.parse_graph(json.dumps(document))
        assert info.value.field == field

    def test_invalid_json(self):
        with pytest.raises(GraphParseError):
            graph_service.parse_graph("{not json")

    def test_empty_input(self):
        with pytest.raises(GraphParseError):
            graph_service.parse_graph("   ")

    def test_non_integer_plain_matrix(self):
        with pytest.raises(GraphParseError) as info:
            graph_service.parse_graph("1 x\n0 0")
        assert info.value.field == "matrix[0][1]"

    def test_matrix_and_edges_together(self):
        document = GraphDocument(vertices=["v"], matrix=[[1]], edges=[{"from": "v", "to": "v"}])
        with pytest.raises(GraphParseError):
            graph_service.graph_from_document(document)


class TestEdges:
    def test_canonical_identifiers(self, two_vertex):
        ids = [graph_service.edge_id(two_vertex, e) for e in graph_service.edges(two_vertex)]
        assert ids == ["v->v#0", "v->v#1", "v->w#0"]

    def test_user_labels_resolve(self):
        g = graph_service.parse_graph(json.dumps({
            "vertices": ["v", "w"],
            "edges": [
                {"from": "v", "to": "v", "count": 2, "labels": ["a", "b"]},
                {"from": "v", "to": "w", "label": "e"},
            ],
        }))
        assert graph_service.edge_id(g, graph_service.edge_from_id(g, "b")) == "v->v#1"
        assert graph_service.edge_id(g, graph_service.edge_from_id(g, "e")) == "v->w#0"
        assert graph_service.serialize_graph(g)["edge_labels"] == {"a": "v->v#0", "b": "v->v#1", "e": "v->w#0"}

    def test_label_count_mismatch(self):
        with pytest.raises(GraphParseError):
            graph_service.parse_graph(json.dumps({
                "vertices": ["v"],
                "edges": [{"from": "v", "to": "v", "count": 2, "labels": ["a"]}],
            }))

    def test_unknown_edge(self, two_vertex):
        with pytest.raises(UnknownVertexError):
            graph_service.edge_from_id(two_vertex, "v->w#1")
        with pytest.raises(UnknownVertexError):
            graph_service.edge_from_id(two_vertex, "nonsense")

    def test_path_from_ids_in_traversal_order(self, two_vertex):
        path = graph_service.path_from_ids(two_vertex, ["v->v#1", "v->w#0"])
        assert (path.source, path.range, path.length) == (0, 1, 2)
        with pytest.raises(GraphParseError):
            graph_service.path_from_ids(two_vertex, ["v->w#0", "v->v#0"])


class TestComponents:
    def test_tarjan_yields_sinks_first(self):
        adjacency = {0: [1], 1: [0, 2], 2: []}
        components = list(tarjan(range(3), lambda v: adjacency[v]))
        assert components == [{2}, {0, 1}]

    def test_collection_graph(self, collection):
        dec = graph_service.scc_decompose(collection)
        assert dec.m == 3
        assert [c.vertices for c in dec.components] == [(0,), (1,), (2,)]
        assert [c.is_sink for c in dec.components] == [False, False, True]
        assert not any(c.is_zero for c in dec.components)

    def test_edgeless_graph(self, edgeless):
        dec = graph_service.scc_decompose(edgeless)
        assert [c.vertices for c in dec.components] == [(0,), (1,)]
        assert all(c.is_zero and c.is_sink for c in dec.components)
        assert graph_service.sources(edgeless) == frozenset({0, 1})
        assert graph_service.ideal_i_vertices(edgeless, dec) == frozenset({0, 1})

    def test_single_loop(self, single_loop):
        dec = graph_service.scc_decompose(single_loop)
        assert graph_service.sources(single_loop) == frozenset()
        assert graph_service.ideal_i_vertices(single_loop, dec) == frozenset()

    def test_sources_follow_zero_columns(self):
        g = matrix_graph([[3, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 2]], ["w", "u2", "u1", "v"])
        assert graph_service.sources(g) == frozenset({2})
        assert graph_service.sinks(g) == frozenset()

    def test_order_is_block_upper_triangular(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 9))
            g = matrix_graph(random_matrix(rng, n))
            dec = graph_service.scc_decompose(g)
            assert sorted(dec.order) == list(range(n))
            for i in range(n):
                for j in range(n):
                    if dec.vertex_component[i] > dec.vertex_component[j]:
                        assert g.adjacency[i][j] == 0

    def test_sources_and_j_partition_the_vertices(self, rng):
        for _ in range(30):
            g = matrix_graph(random_matrix(rng, int(rng.integers(1, 7))))
            sources, j = graph_service.sources(g), graph_service.j_vertices(g)
            assert not sources & j
            assert sources | j == frozenset(range(g.n))

    def test_ideal_vertices_receive_no_long_paths(self, rng):
        for _ in range(30):
            g = matrix_graph(random_matrix(rng, int(rng.integers(1, 7))))
            dec = graph_service.scc_decompose(g)
            for v in graph_service.ideal_i_vertices(g, dec):
                assert graph_service.count_paths(g, g.n, target=v) == 0

    def test_communicating_graph_puts_the_component_first(self, three_maximal):
        dec = graph_service.scc_decompose(three_maximal)
        h = graph_service.communicating_graph(three_maximal, dec, 1)
        assert h.vertex_labels == ("v", "u")
        assert h.adjacency == ((2, 1), (0, 1))

    def test_tarjan_handles_long_chains(self):
        n = 20000
        components = list(tarjan(range(n), lambda v: [v + 1] if v + 1 < n else []))
        assert len(components) == n
        assert components[0] == {n - 1}
        assert components[-1] == {0}


class TestCommunication:
    def component_of(self, g, dec, label):
        return dec.vertex_component[g.index_of(label)]

    def test_reachable_set_follows_the_edges(self):
        g = fixture_graph("ex6_2")
        dec = graph_service.scc_decompose(g)
        w, v = self.component_of(g, dec, "w"), self.component_of(g, dec, "v")
        assert graph_service.reachable_component_set(dec, vertex=g.index_of("w")) == frozenset({w, v})
        assert graph_service.reachable_component_set(dec, vertex=g.index_of("v")) == frozenset({v})
        assert graph_service.reachable_component_set(dec, component=w) == frozenset({w, v})

    def test_isolated_vertex_reaches_only_itself(self, edgeless):
        dec = graph_service.scc_decompose(edgeless)
        own = dec.vertex_component[0]
        assert graph_service.reachable_component_set(dec, vertex=0) == frozenset({own})
        assert dec.components[own].is_zero

    def test_inductive_limit_graph(self):
        g = fixture_graph("ex8_3")
        dec = graph_service.scc_decompose(g)
        assert graph_service.reachable_component_set(dec, vertex=g.index_of("v1")) == frozenset(range(dec.m))
        v3 = self.component_of(g, dec, "v3")
        assert graph_service.reachable_component_set(dec, vertex=g.index_of("v3")) == frozenset({v3})

    def test_needs_exactly_one_argument(self, two_vertex):
        dec = graph_service.scc_decompose(two_vertex)
        with pytest.raises(ValueError):
            graph_service.reachable_component_set(dec)
        with pytest.raises(ValueError):
            graph_service.reachable_component_set(dec, vertex=0, component=0)

    def test_communicating_graph_of_a_middle_component(self):
        g = fixture_graph("ex6_5")
        dec = graph_service.scc_decompose(g)
        h = graph_service.communicating_graph(g, dec, self.component_of(g, dec, "v"))
        assert h.vertex_labels == ("v", "u1")
        assert h.adjacency == ((2, 1), (0, 0))

    def test_communicating_graph_of_a_sink_is_the_component(self):
        g = fixture_graph("ex6_2")
        dec = graph_service.scc_decompose(g)
        h = graph_service.communicating_graph(g, dec, self.component_of(g, dec, "v"))
        assert h.vertex_labels == ("v",)
        assert h.adjacency == ((2,),)

    def test_communicating_graph_can_be_the_whole_graph(self):
        g = fixture_graph("ex6_3")
        dec = graph_service.scc_decompose(g)
        h = graph_service.communicating_graph(g, dec, self.component_of(g, dec, "u"))
        assert set(h.vertex_labels) == set(g.vertex_labels)
        assert h.vertex_labels[:2] in (("u", "w"), ("w", "u"))
        assert h.vertex_labels[2] == "v"
        for i, a in enumerate(h.vertex_labels):
            for j, b in enumerate(h.vertex_labels):
                assert h.adjacency[i][j] == g.adjacency[g.index_of(a)][g.index_of(b)]


class TestPathCounting:
    def test_two_vertex_example(self, two_vertex):
        assert graph_service.count_paths(two_vertex, 3, source=0) == 12

    def test_length_zero(self, rng):
        g = matrix_graph(random_matrix(rng, 4))
        power = graph_service.path_count_matrix(g, 0)
        assert [[int(x) for x in row] for row in power] == np.eye(4, dtype=int).tolist()

    def test_collection_counts(self):
        g = matrix_graph([[2, 1], [0, 1]], ["v1", "v0"])
        for k in range(1, 10):
            # a^k loops plus (a^k - 1)/(a - 1) paths that exit at some point
            assert graph_service.count_paths(g, k, source=0) == 2 ** k + (2 ** k - 1)

    def test_no_overflow(self):
        g = matrix_graph([[3]])
        assert graph_service.count_paths(g, 60) == 3 ** 60

    def test_matches_exhaustive_enumeration(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 9))
            matrix = random_matrix(rng, n, max_count=2, density=0.25).tolist()
            g = matrix_graph(matrix)
            k = int(rng.integers(0, 9))
            source = int(rng.integers(n))
            expected = sum(1 for _ in enumerate_paths(matrix, source, k))
            assert graph_service.count_paths(g, k, source=source) == expected

    def test_parallel_edges_match_enumeration(self, rng):
        for _ in range(10):
            matrix = random_matrix(rng, 3, max_count=4, density=0.5).tolist()
            g = matrix_graph(matrix)
            for target in range(3):
                expected = sum(1 for s in range(3) for p in enumerate_paths(matrix, s, 4) if p[-1] == target)
                assert graph_service.count_paths(g, 4, target=target) == expected
