import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import ValidationError

from app.config import settings
from app.errors import ConsistencyError, GraphParseError, PreconditionError, QueryParseError
from app.models import (
    Algebra,
    ConvexCheckReport,
    FiniteExtreme,
    GroundStates,
    Monomial,
    MonomialSpec,
    MultiGraph,
    Path,
    SeriesMethod,
    SeriesValue,
    SimplexDescription,
    StateEvaluation,
    StateKind,
    StateQuery,
    Trace,
)
from app.services.entropy_service import entropy_service
from app.services.graph_service import graph_service
from app.services.spectral_service import parse_beta, spectral_service
from app.services.word_algebra import is_diagonal

logger = logging.getLogger(__name__)


def parse_algebra(value: Union[str, Algebra]) -> Algebra:
    aliases = {"cuntz": Algebra.CUNTZ_PIMSNER, "cp": Algebra.CUNTZ_PIMSNER, "o_x": Algebra.CUNTZ_PIMSNER}
    if isinstance(value, Algebra):
        return value
    key = value.strip().lower()
    if key in aliases:
        return aliases[key]
    try:
        return Algebra(key)
    except ValueError:
        raise GraphParseError(f"unknown algebra '{value}'", field="algebra")


class StateService:
    """KMS states parametrized by traces: finite-type, infinite-type and ground states"""

    # Admissibility

    def _check_beta(self, beta: float) -> None:
        if not beta > 0:
            raise PreconditionError(f"beta = {beta} must be positive", field="beta")

    def is_admissible(self, g: MultiGraph, tau: Trace, beta: float) -> bool:
        return entropy_service.trace_entropy(g, tau) < beta - settings.ADMISSIBILITY_SLACK

    def is_averaging(self, g: MultiGraph, tau: Trace, beta: float) -> bool:
        if spectral_service.averaging_residual(g, tau, beta) > settings.AVERAGING_TOLERANCE * max(1.0, math.exp(beta)):
            return False
        ideal = graph_service.ideal_i_vertices(g, graph_service.scc_decompose(g))
        return all(tau.weights[v] <= settings.SUPPORT_EPSILON for v in ideal)

    def j_vertices(self, g: MultiGraph, algebra: Algebra) -> frozenset:
        """Vertices whose projections lie in the ideal J defining the quotient"""
        if algebra is Algebra.TOEPLITZ:
            return frozenset()
        if algebra is Algebra.CUNTZ_PIMSNER:
            return graph_service.j_vertices(g)
        return frozenset(range(g.n))

    # The normalizing series

    def _reachable(self, g: MultiGraph, tau: Trace) -> List[int]:
        return sorted(graph_service.reachable_vertices(g, tau.support))

    def c_series(self, g: MultiGraph, tau: Trace, beta: float, tol: Optional[float] = None) -> SeriesValue:
        """
        c = sum_k e^{-k beta} sum_{|mu| = k} tau(s(mu)).

        Closed form on the subgraph reachable from the support of tau, checked
        against the truncated series with a rigorous tail bound.
        """
        self._check_beta(beta)
        tol = settings.SERIES_TOLERANCE if tol is None else tol
        if not self.is_admissible(g, tau, beta):
            return SeriesValue(value=math.inf, method=SeriesMethod.DIVERGENT, tail_bound=math.inf)

        reach = self._reachable(g, tau)
        scaled = math.exp(-beta) * g.matrix[np.ix_(reach, reach)]
        weights = tau.vector[reach]
        closed = float(self._resolvent_row(scaled, weights).sum())

        truncated, tail, terms = self._truncated_sum(scaled, weights, tol)
        if abs(closed - truncated) > tol + tail:
            logger.error("c series mismatch: closed form %.15g, truncated %.15g (tail %.3g)", closed, truncated, tail)
            raise ConsistencyError(
                f"closed form {closed!r} and truncated sum {truncated!r} disagree beyond {tol}", field="c"
            )
        certified = tail <= tol
        if certified:
            logger.debug("c series %.15g from %d terms, tail bound %.3g", closed, terms, tail)
        else:
            logger.warning(
                "c series %.15g not certified: tail bound %.3g after %d terms (beta=%.12g)", closed, tail, terms, beta
            )
        return SeriesValue(
            value=closed,
            method=SeriesMethod.CLOSED_FORM,
            tail_bound=tail,
            truncated_value=truncated,
            terms=terms,
            certified=certified,
        )

    def _resolvent_row(self, scaled: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """p^T (I - A)^{-1}, solved as (I - A)^T y = p"""
        lu = scipy.linalg.lu_factor(np.eye(scaled.shape[0]) - scaled)
        return scipy.linalg.lu_solve(lu, weights, trans=1)

    def _truncated_sum(self, scaled: np.ndarray, weights: np.ndarray, tol: float) -> Tuple[float, float, int]:
        # Find a power with ||A^m||_inf <= 1/2; the tail then decays geometrically in blocks of m
        norms = [1.0]
        power = np.eye(scaled.shape[0])
        contraction = None
        while len(norms) <= settings.SERIES_MAX_TERMS:
            power = power @ scaled
            norm = float(np.abs(power).sum(axis=1).max())
            if norm <= 0.5:
                contraction = norm
                break
            norms.append(norm)
        block = len(norms)
        block_norm = math.fsum(norms)

        total, row, terms = 0.0, weights.copy(), 0
        tail = math.inf
        while terms < settings.SERIES_MAX_TERMS:
            total += float(row.sum())
            terms += 1
            row = row @ scaled
            if contraction is not None:
                if contraction == 0.0:
                    tail = 0.0 if terms >= block else math.inf
                else:
                    tail = block_norm * contraction ** (terms // block) / (1.0 - contraction)
                if tail <= tol / 2:
                    break
        return total, tail, terms

    def resolvent_row(self, g: MultiGraph, tau: Trace, beta: float) -> np.ndarray:
        """g(v) = (p^T (I - e^{-beta} G_R)^{-1})_v on the reachable set R, 0 elsewhere"""
        reach = self._reachable(g, tau)
        scaled = math.exp(-beta) * g.matrix[np.ix_(reach, reach)]
        row = np.zeros(g.n)
        row[reach] = self._resolvent_row(scaled, tau.vector[reach])
        return row

    def _finite_profile(self, g: MultiGraph, tau: Trace, beta: float) -> Tuple[np.ndarray, float]:
        self._check_beta(beta)
        if not self.is_admissible(g, tau, beta):
            raise PreconditionError(
                f"trace entropy {entropy_service.trace_entropy(g, tau):.12g} is not below beta = {beta:.12g}",
                field="trace",
            )
        series = self.c_series(g, tau, beta)
        return self.resolvent_row(g, tau, beta), series.value

    # Evaluation

    def finite_state_eval(self, g: MultiGraph, tau: Trace, beta: float, m: Monomial) -> float:
        row, c = self._finite_profile(g, tau, beta)
        return self._finite_value(row, c, beta, m)

    def _finite_value(self, row: np.ndarray, c: float, beta: float, m: Optional[Monomial]) -> float:
        if not is_diagonal(m):
            return 0.0
        return math.exp(-m.mu.length * beta) * float(row[m.mu.source]) / c

    def infinite_state_eval(self, g: MultiGraph, tau: Trace, beta: float, m: Monomial) -> float:
        self._check_beta(beta)
        if not self.is_averaging(g, tau, beta):
            raise PreconditionError(f"trace is not an averaging trace at beta = {beta:.12g}", field="trace")
        return self._infinite_value(tau, beta, m)

    def _infinite_value(self, tau: Trace, beta: float, m: Optional[Monomial]) -> float:
        if not is_diagonal(m):
            return 0.0
        return math.exp(-m.mu.length * beta) * tau.weights[m.mu.source]

    def _check_vanishes_on_j(self, g: MultiGraph, tau: Trace, algebra: Algebra) -> None:
        forbidden = self.j_vertices(g, algebra)
        if any(v in forbidden for v in tau.support):
            raise PreconditionError(f"trace does not vanish on J for {algebra.value}", field="trace")

    def ground_state_eval(self, g: MultiGraph, tau: Trace, m: Monomial, algebra: Algebra = Algebra.TOEPLITZ) -> float:
        self._check_vanishes_on_j(g, tau, algebra)
        return self._ground_value(tau, m)

    def _ground_value(self, tau: Trace, m: Optional[Monomial]) -> float:
        if not is_diagonal(m) or m.mu.length > 0:
            return 0.0
        return tau.weights[m.mu.source]

    def evaluator(self, g: MultiGraph, tau: Trace, beta: float, kind: StateKind, algebra: Algebra = Algebra.TOEPLITZ):
        """Callable word -> value for one state, with preconditions checked once"""
        if kind is StateKind.FINITE:
            self._check_vanishes_on_j(g, tau, algebra)
            row, c = self._finite_profile(g, tau, beta)
            return lambda word: self._finite_value(row, c, beta, word)
        if kind is StateKind.INFINITE:
            self._check_beta(beta)
            if not self.is_averaging(g, tau, beta):
                raise PreconditionError(f"trace is not an averaging trace at beta = {beta:.12g}", field="trace")
            return lambda word: self._infinite_value(tau, beta, word)
        self._check_vanishes_on_j(g, tau, algebra)
        return lambda word: self._ground_value(tau, word)

    def evaluate(self, g: MultiGraph, tau: Trace, beta: float, m: Optional[Monomial], kind: StateKind) -> float:
        return self.evaluator(g, tau, beta, kind)(m)

    def state_vertex_vector(self, g: MultiGraph, tau: Trace, beta: float, kind: StateKind) -> Tuple[float, ...]:
        """Values on the vertex projections, a complete invariant of the state"""
        evaluate = self.evaluator(g, tau, beta, kind)
        return tuple(evaluate(Monomial.vertex(v)) for v in range(g.n))

    def level_masses(self, g: MultiGraph, tau: Trace, beta: float, depth: int) -> List[float]:
        """Phi(tau)(p_k) = c^{-1} e^{-k beta} p^T G^k 1 for k = 0..depth"""
        _, c = self._finite_profile(g, tau, beta)
        scaled = math.exp(-beta) * g.matrix
        row = tau.vector
        masses = []
        for _ in range(depth + 1):
            masses.append(float(row.sum()) / c)
            row = row @ scaled
        return masses

    # Simplices

    def kms_simplex(self, g: MultiGraph, beta: float, algebra: Union[str, Algebra]) -> SimplexDescription:
        algebra = parse_algebra(algebra)
        self._check_beta(beta)
        entropies = entropy_service.vertex_entropies(g)
        forbidden = self.j_vertices(g, algebra)

        finite = []
        for v in range(g.n):
            if v in forbidden or not entropies[v] < beta - settings.ADMISSIBILITY_SLACK:
                continue
            tau = Trace.dirac(g.n, v)
            series = self.c_series(g, tau, beta)
            finite.append(
                FiniteExtreme(vertex=g.vertex_labels[v], trace=tau, c=series.value, c_certified=series.certified)
            )

        infinite = spectral_service.avt_extreme_points(g, beta).extreme_points
        logger.debug(
            "%s simplex at beta=%.6g: %d finite, %d infinite extremes", algebra.value, beta, len(finite), len(infinite)
        )
        return SimplexDescription(
            beta=beta, algebra=algebra, finite_extremes=tuple(finite), infinite_extremes=tuple(infinite)
        )

    def convex_combination_check(
        self, g: MultiGraph, tau1: Trace, tau2: Trace, weight: float, beta: float
    ) -> ConvexCheckReport:
        """Compare Phi(weight tau1 + (1 - weight) tau2) with the c-reweighted mixture of Phi(tau1), Phi(tau2)"""
        if not 0.0 <= weight <= 1.0:
            raise PreconditionError(f"weight {weight} is outside [0, 1]", field="weight")
        mixture = Trace.from_vector(weight * tau1.vector + (1.0 - weight) * tau2.vector)
        c1 = self.c_series(g, tau1, beta).value
        c2 = self.c_series(g, tau2, beta).value
        c = self.c_series(g, mixture, beta).value
        combined = weight * c1 + (1.0 - weight) * c2

        phi = np.array(self.state_vertex_vector(g, mixture, beta, StateKind.FINITE))
        phi1 = np.array(self.state_vertex_vector(g, tau1, beta, StateKind.FINITE))
        phi2 = np.array(self.state_vertex_vector(g, tau2, beta, StateKind.FINITE))
        expected = weight * (c1 / combined) * phi1 + (1.0 - weight) * (c2 / combined) * phi2
        return ConvexCheckReport(
            max_deviation=float(np.abs(phi - expected).max()),
            c_deviation=abs(c - combined),
            c_mixture=c,
            c_combined=combined,
        )

    def ground_and_kms_infinity(self, g: MultiGraph, algebra: Union[str, Algebra]) -> GroundStates:
        """Dirac traces vanishing on J; ground and KMS-infinity states coincide for an abelian diagonal"""
        algebra = parse_algebra(algebra)
        forbidden = self.j_vertices(g, algebra)
        vertices = [v for v in range(g.n) if v not in forbidden]
        return GroundStates(
            algebra=algebra,
            extremes=tuple(Trace.dirac(g.n, v) for v in vertices),
            vertices=tuple(g.vertex_labels[v] for v in vertices),
        )

    # Queries

    def parse_trace(self, g: MultiGraph, weights: Dict[str, float]) -> Trace:
        vector = [0.0] * g.n
        for label, weight in weights.items():
            if label not in g.vertex_labels:
                raise QueryParseError(f"unknown vertex '{label}'", field=f"trace.{label}")
            vector[g.index_of(label)] = float(weight)
        try:
            return Trace(weights=tuple(vector))
        except ValidationError as e:
            raise QueryParseError(e.errors()[0]["msg"], field="trace")

    def parse_monomial(self, g: MultiGraph, spec: MonomialSpec, field: str) -> Monomial:
        try:
            if spec.vertex is not None:
                if spec.mu or spec.nu:
                    raise QueryParseError("give either a vertex or edge paths", field=field)
                if spec.vertex not in g.vertex_labels:
                    raise QueryParseError(f"unknown vertex '{spec.vertex}'", field=f"{field}.vertex")
                return Monomial.vertex(g.index_of(spec.vertex))
            if not spec.mu and not spec.nu:
                raise QueryParseError("empty monomial needs a vertex", field=field)
            mu = graph_service.path_from_ids(g, spec.mu) if spec.mu else None
            nu = graph_service.path_from_ids(g, spec.nu) if spec.nu else None
        except QueryParseError:
            raise
        except GraphParseError as e:
            raise QueryParseError(e.message, field=field)
        mu = mu or Path(start=nu.source)
        nu = nu or Path(start=mu.source)
        return Monomial(mu=mu, nu=nu)

    def evaluate_query(self, g: MultiGraph, query: StateQuery) -> StateEvaluation:
        beta = parse_beta(query.beta)
        tau = self.parse_trace(g, query.trace)
        monomials = [self.parse_monomial(g, spec, f"monomials[{i}]") for i, spec in enumerate(query.monomials)]
        if not monomials:
            monomials = [Monomial.vertex(v) for v in range(g.n)]

        kind_text = query.kind.strip().lower()
        if kind_text == "auto":
            if self.is_admissible(g, tau, beta):
                kind = StateKind.FINITE
            elif self.is_averaging(g, tau, beta):
                kind = StateKind.INFINITE
            else:
                raise PreconditionError(
                    "trace is neither admissible nor averaging at this beta", field="trace"
                )
        else:
            try:
                kind = StateKind(kind_text)
            except ValueError:
                raise QueryParseError(f"unknown state kind '{query.kind}'", field="kind")

        evaluate = self.evaluator(g, tau, beta, kind, parse_algebra(query.algebra))
        values = tuple(evaluate(m) for m in monomials)
        c = self.c_series(g, tau, beta).value if kind is StateKind.FINITE else None
        return StateEvaluation(beta=beta, kind=kind, values=values, c=c)


# Singleton instance
state_service = StateService()
