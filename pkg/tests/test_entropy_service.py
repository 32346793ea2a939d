import math

import pytest

from app.fixtures import fixture_graph
from app.models import Trace
from app.services.entropy_service import entropy_service, pretty_log, same_radius
from tests.helpers import LOG2, LOG3, matrix_graph, random_irreducible_matrix, random_matrix


def test_pretty_log():
    assert pretty_log(0.0) == "0"
    assert pretty_log(LOG2) == "log 2"
    assert pretty_log(LOG3) == "log 3"
    assert pretty_log(math.log(1 + math.sqrt(5))) == f"{math.log(1 + math.sqrt(5)):.12g}"


def test_same_radius():
    assert same_radius(2.0, 2.0)
    assert not same_radius(2.0, 3.0)
    assert same_radius(3.2360679774997896, 3.23606797749979)


class TestEntropies:
    def test_two_vertex(self, two_vertex):
        assert entropy_service.vertex_entropies(two_vertex) == [LOG2, 0.0]
        assert entropy_service.strong_entropy(two_vertex) == pytest.approx(LOG2)
        assert entropy_service.entropy_hx(two_vertex) == 0.0

    def test_collection(self, collection):
        assert entropy_service.entropy_hx(collection) == 0.0
        assert entropy_service.strong_entropy(collection) == pytest.approx(LOG3)
        assert entropy_service.vertex_entropies(collection) == pytest.approx([LOG3, LOG2, 0.0])

    def test_edgeless(self, edgeless):
        assert entropy_service.strong_entropy(edgeless) == 0.0
        assert entropy_service.entropy_hx(edgeless) == 0.0
        assert entropy_service.vertex_entropies(edgeless) == [0.0, 0.0]

    def test_golden_ratio_example(self):
        g = fixture_graph("ex6_3")
        assert entropy_service.entropy_hx(g) == pytest.approx(LOG2)
        assert entropy_service.strong_entropy(g) == pytest.approx(math.log(1 + math.sqrt(5)), abs=1e-12)

    def test_trace_entropy_takes_the_support_maximum(self, collection):
        tau = Trace(weights=(0.0, 0.5, 0.5))
        assert entropy_service.trace_entropy(collection, tau) == pytest.approx(LOG2)

    def test_sink_formula_matches_dirac_traces(self, rng):
        for _ in range(100):
            g = matrix_graph(random_matrix(rng, int(rng.integers(1, 7))))
            assert entropy_service.entropy_hx(g) == pytest.approx(
                entropy_service.entropy_hx_from_traces(g), abs=1e-12
            )

    def test_irreducible_graphs(self, rng):
        for _ in range(20):
            g = matrix_graph(random_irreducible_matrix(rng, int(rng.integers(1, 7))))
            h = entropy_service.strong_entropy(g)
            assert entropy_service.entropy_hx(g) == pytest.approx(h, abs=1e-9)
            assert h >= 0.0

    def test_trace_entropy_estimate_converges(self, two_vertex):
        tau = Trace.dirac(2, 0)
        estimate = entropy_service.trace_entropy_estimate(two_vertex, tau, 60)
        assert estimate == pytest.approx(LOG2, abs=0.05)

    def test_trace_entropy_estimate_vanishes_on_sinks(self, two_vertex):
        assert entropy_service.trace_entropy_estimate(two_vertex, Trace.dirac(2, 1), 3) is None


class TestLambdaMaximal:
    def test_three_equal_radii(self, three_maximal):
        maximal = entropy_service.lambda_maximal_components(three_maximal)
        assert [(m.component, m.lam, m.beta_zero_boundary) for m in maximal] == [
            (0, pytest.approx(2.0), False),
            (1, pytest.approx(2.0), False),
            (2, pytest.approx(2.0), False),
            (3, 1.0, True),
        ]

    def test_dominated_component_is_not_maximal(self):
        g = fixture_graph("ex6_1")
        assert [m.component for m in entropy_service.lambda_maximal_components(g)] == [1]

    def test_zero_components_only_on_request(self):
        g = fixture_graph("ex6_5")
        assert [m.component for m in entropy_service.lambda_maximal_components(g)] == [0, 2]
        with_zero = entropy_service.lambda_maximal_components(g, include_zero=True)
        assert [(m.component, m.lam) for m in with_zero] == [(0, 3.0), (2, 2.0), (3, 0.0)]


class TestPhaseDiagram:
    def test_collection_graph(self, collection):
        phase = entropy_service.phase_diagram(collection)
        assert [t.pretty for t in phase.transitions] == ["0", "log 2", "log 3"]
        assert phase.includes_beta_zero_entry
        assert [i.allowed for i in phase.intervals] == [("v0",), ("v1", "v0"), ("v2", "v1", "v0")]
        assert phase.intervals[-1].hi is None

    def test_no_boundary_entry(self):
        phase = entropy_service.phase_diagram(fixture_graph("ex6_2"))
        assert not phase.includes_beta_zero_entry
        assert [t.beta for t in phase.transitions] == pytest.approx([LOG2, LOG3])

    def test_interval_membership_is_half_open(self, collection):
        phase = entropy_service.phase_diagram(collection)
        assert phase.allowed_at(LOG2) == ("v0",)
        assert phase.allowed_at(LOG2 + 1e-6) == ("v1", "v0")
        assert phase.allowed_at(10.0) == ("v2", "v1", "v0")

    def test_equal_radii_share_a_transition(self, three_maximal):
        phase = entropy_service.phase_diagram(three_maximal)
        boundary, transition = phase.transitions
        assert boundary.boundary and boundary.components == (3,)
        assert transition.components == (0, 1, 2)
        assert transition.communicating_vertices == ("x", "v", "w")

    def test_irreducible_graph_has_a_single_transition(self):
        g = matrix_graph([[1, 1], [1, 1]])
        phase = entropy_service.phase_diagram(g)
        assert [t.pretty for t in phase.transitions] == ["log 2"]
        assert [i.allowed for i in phase.intervals] == [(), ("v0", "v1")]


def test_entropy_report(two_vertex):
    report = entropy_service.entropy_report(two_vertex)
    assert report.h_min_pretty == "0"
    assert report.h_strong_pretty == "log 2"
    assert report.per_vertex == {"v": 2.0, "w": 0.0}
    assert report.per_component == {0: 2.0, 1: 0.0}
