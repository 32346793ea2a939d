import math

import numpy as np
import pytest

from app.config import settings
from app.errors import DimensionCapError, PreconditionError
from app.fixtures import fixture_graph, fixture_names
from app.models import Monomial, StateKind, Trace
from app.services.entropy_service import entropy_service
from app.services.fock_service import fock_service
from app.services.graph_service import graph_service
from app.services.state_service import state_service
from app.services.word_algebra import multiply
from tests.helpers import LOG2, LOG3, matrix_graph


class TestTruncatedFock:
    def test_dimension(self, two_vertex):
        fock = fock_service.build_truncated_fock(two_vertex, 3)
        # paths from v: 1, 3, 6 and 12 by length; w only has the empty path
        assert fock.dimension == fock_service.fock_dimension(two_vertex, 3) == 2 + 3 + 6 + 12
        assert [p.length for p in fock.basis] == sorted(p.length for p in fock.basis)

    def test_depth_must_be_positive(self, two_vertex):
        with pytest.raises(PreconditionError):
            fock_service.build_truncated_fock(two_vertex, 0)

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setattr(settings, "FOCK_DIMENSION_CAP", 50)
        with pytest.raises(DimensionCapError):
            fock_service.build_truncated_fock(matrix_graph([[3]]), 5)

    @pytest.mark.parametrize("name", ["ex8_1", "ex8_4", "ex6_3", "ex6_4", "ex6_7"])
    def test_toeplitz_relations_are_exact(self, name):
        fock = fock_service.build_truncated_fock(fixture_graph(name), 4)
        assert fock_service.relations_exact(fock)

    def test_edgeless_relations(self, edgeless):
        fock = fock_service.build_truncated_fock(edgeless, 2)
        assert fock.generators == {}
        assert fock_service.relations_exact(fock)

    def test_creation_operator_appends_edges(self, two_vertex):
        fock = fock_service.build_truncated_fock(two_vertex, 2)
        loop = graph_service.path_from_ids(two_vertex, ["v->v#0"])
        exit_edge = graph_service.path_from_ids(two_vertex, ["v->w#0"])
        column = fock_service.path_operator(fock, exit_edge)[:, fock.index[loop]].toarray().ravel()
        assert column.sum() == 1
        assert column[fock.index[loop.then(exit_edge)]] == 1

    def test_canonical_products_match_matrices(self, three_maximal):
        fock = fock_service.build_truncated_fock(three_maximal, 6)
        pairs = fock_service.sample_monomials(three_maximal, 80, 4, seed=7)
        assert fock_service.canonicalization_check(fock, pairs)

    def test_four_factor_products(self, two_vertex):
        fock = fock_service.build_truncated_fock(two_vertex, 8)
        lower = fock_service._below_top(fock, 0)
        words = [w for pair in fock_service.sample_monomials(two_vertex, 20, 2, seed=1) for w in pair]
        for a, b, c, d in zip(words, words[1:], words[2:], words[3:]):
            symbolic = multiply(multiply(a, b), multiply(c, d))
            matrices = [fock_service.operator_matrix(fock, w) for w in (a, b, c, d)]
            numeric = matrices[0] @ matrices[1] @ matrices[2] @ matrices[3] @ lower
            assert (numeric != fock_service.operator_matrix(fock, symbolic) @ lower).nnz == 0


class TestSampling:
    def test_seeded(self, three_maximal):
        first = fock_service.sample_monomials(three_maximal, 30, 4, seed=42)
        second = fock_service.sample_monomials(three_maximal, 30, 4, seed=42)
        assert first == second

    def test_words_are_well_formed(self, three_maximal):
        for f, h in fock_service.sample_monomials(three_maximal, 100, 4, seed=0):
            assert f.mu.source == f.nu.source
            assert h.mu.source == h.nu.source
            assert f.mu.length + f.nu.length <= 4


class TestResiduals:
    def test_finite_state_residual(self, two_vertex):
        residual = fock_service.kms_residual(two_vertex, 6, Trace.dirac(2, 0), LOG3, StateKind.FINITE, trials=200)
        assert residual < 1e-12

    def test_infinite_state_residual(self, two_vertex):
        tau = Trace(weights=(2 / 3, 1 / 3))
        assert fock_service.kms_residual(two_vertex, 6, tau, LOG2, StateKind.INFINITE) < 1e-12

    def test_non_kms_functional_is_detected(self, two_vertex):
        loop = graph_service.path_from_ids(two_vertex, ["v->v#0"])
        pairs = [(Monomial.creation(loop), Monomial.annihilation(loop))]
        evaluate = lambda word: state_service.ground_state_eval(two_vertex, Trace.dirac(2, 0), word)
        assert fock_service.max_residual(evaluate, pairs, LOG3) == pytest.approx(1 / 3)

    def test_truncated_vector_state_is_kms(self, two_vertex):
        fock = fock_service.build_truncated_fock(two_vertex, 6)
        pairs = fock_service.sample_monomials(two_vertex, 50, 4, seed=2)
        assert fock_service.fock_kms_residual(fock, Trace(weights=(0.5, 0.5)), 1.0, pairs) < 1e-10

    def test_vector_state_matches_closed_form(self, two_vertex):
        fock = fock_service.build_truncated_fock(two_vertex, 12)
        tau = Trace.dirac(2, 0)
        for v in range(2):
            numeric = fock_service.fock_state_eval(fock, tau, LOG3, Monomial.vertex(v))
            exact = state_service.finite_state_eval(two_vertex, tau, LOG3, Monomial.vertex(v))
            assert numeric == pytest.approx(exact, abs=1e-2)

    def test_level_masses(self, single_loop):
        fock = fock_service.build_truncated_fock(single_loop, 8)
        deviation, remainder = fock_service.level_mass_check(single_loop, fock, Trace.dirac(1, 0), 1.0)
        assert deviation < 1e-12
        assert remainder == pytest.approx(math.exp(-8), abs=1e-12)


class TestNormEntropy:
    @pytest.mark.parametrize(
        "name, expected", [("ex8_1", LOG2), ("ex6_1", LOG3), ("ex6_3", math.log(1 + math.sqrt(5)))]
    )
    def test_converges_to_the_strong_entropy(self, name, expected):
        points = fock_service.norm_entropy_estimate(fixture_graph(name), 60)
        assert len(points) == 60
        assert points[-1].value == pytest.approx(expected, abs=0.05)

    def test_nilpotent_graph_vanishes(self):
        points = fock_service.norm_entropy_estimate(matrix_graph([[0, 1], [0, 0]]), 3)
        assert not points[0].vanished
        assert points[1].vanished and points[1].value == 0.0

    def test_range(self, two_vertex):
        with pytest.raises(PreconditionError):
            fock_service.norm_entropy_estimate(two_vertex, 0)


class TestVectorStatesAcrossFixtures:
    @pytest.mark.parametrize("name", fixture_names())
    def test_kms_at_every_depth(self, name):
        g = fixture_graph(name)
        beta = entropy_service.strong_entropy(g) + 0.5
        pairs = fock_service.sample_monomials(g, 30, 2, seed=1)
        shallow = fock_service.build_truncated_fock(g, 4)
        deep = fock_service.build_truncated_fock(g, 6)
        for v in range(g.n):
            tau = Trace.dirac(g.n, v)
            residual = fock_service.fock_kms_residual(deep, tau, beta, pairs)
            assert residual < 1e-10
            assert residual <= fock_service.fock_kms_residual(shallow, tau, beta, pairs) + 1e-12

    @pytest.mark.parametrize("name", fixture_names())
    def test_level_mass_tail_matches_the_resolvent(self, name):
        g = fixture_graph(name)
        beta = entropy_service.strong_entropy(g) + 0.5
        fock = fock_service.build_truncated_fock(g, 5)
        scaled = math.exp(-beta) * g.matrix
        resolvent = np.linalg.solve(np.eye(g.n) - scaled, np.ones(g.n))
        for v in range(g.n):
            tau = Trace.dirac(g.n, v)
            deviation, tail = fock_service.level_mass_check(g, fock, tau, beta)
            c = state_service.c_series(g, tau, beta).value
            expected = float(tau.vector @ np.linalg.matrix_power(scaled, 5) @ resolvent) / c
            assert deviation < 1e-12
            assert tail == pytest.approx(expected, abs=1e-10)
