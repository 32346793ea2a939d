import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix, diags

from app.config import settings
from app.errors import DimensionCapError, PreconditionError
from app.models import Edge, Monomial, MultiGraph, NormEntropyPoint, Path, StateKind, Trace, TruncatedFock
from app.services.graph_service import exact_matrix_power, graph_service
from app.services.spectral_service import spectral_service
from app.services.state_service import state_service
from app.services.word_algebra import multiply

logger = logging.getLogger(__name__)

MonomialPair = Tuple[Monomial, Monomial]


class FockService:
    """Truncated Fock representation of the Toeplitz algebra and numerical KMS checks"""

    def fock_dimension(self, g: MultiGraph, depth: int) -> int:
        return sum(graph_service.count_paths(g, k) for k in range(depth + 1))

    def build_truncated_fock(self, g: MultiGraph, depth: int) -> TruncatedFock:
        """Basis of all paths of length <= depth; T_e xi_lambda = xi_{lambda e} below the top level"""
        if depth < 1:
            raise PreconditionError(f"depth {depth} must be at least 1", field="depth")
        dimension = self.fock_dimension(g, depth)
        if dimension > settings.FOCK_DIMENSION_CAP:
            raise DimensionCapError(
                f"{dimension} basis paths exceed the cap of {settings.FOCK_DIMENSION_CAP}", field="depth"
            )

        out_edges = {v: graph_service.out_edges(g, v) for v in range(g.n)}
        levels: List[List[Path]] = [[Path(start=v) for v in range(g.n)]]
        for _ in range(depth):
            levels.append([
                Path(start=path.start, edges=path.edges + (edge,))
                for path in levels[-1]
                for edge in out_edges[path.range]
            ])
        basis = tuple(path for level in levels for path in level)
        index = {path: i for i, path in enumerate(basis)}

        generators: Dict[Edge, csr_matrix] = {}
        for edge in graph_service.edges(g):
            rows, cols = [], []
            for path in basis:
                if path.length < depth and path.range == edge.source:
                    rows.append(index[Path(start=path.start, edges=path.edges + (edge,))])
                    cols.append(index[path])
            generators[edge] = csr_matrix(
                (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(dimension, dimension), dtype=np.int64
            )

        ranges = np.array([path.range for path in basis])
        lengths = np.array([path.length for path in basis])
        vertex_projections = tuple(
            diags((ranges == v).astype(np.int64), format="csr", dtype=np.int64) for v in range(g.n)
        )
        level_projections = tuple(
            diags((lengths == k).astype(np.int64), format="csr", dtype=np.int64) for k in range(depth + 1)
        )
        logger.debug("truncated Fock space of depth %d has dimension %d", depth, dimension)
        return TruncatedFock.model_construct(
            depth=depth,
            basis=basis,
            index=index,
            generators=generators,
            vertex_projections=vertex_projections,
            level_projections=level_projections,
        )

    def _below_top(self, fock: TruncatedFock, top: int) -> csr_matrix:
        """Projection onto levels 0..top"""
        mask = np.array([path.length <= top for path in fock.basis], dtype=np.int64)
        return diags(mask, format="csr", dtype=np.int64)

    def relations_exact(self, fock: TruncatedFock) -> bool:
        """
        T_e^* T_f = delta_ef Q_{s(e)} on levels below the top, and
        sum_e T_e T_e^* + p_0 = 1 on the whole truncated space.
        """
        lower = self._below_top(fock, fock.depth - 1)
        for e, t_e in fock.generators.items():
            for f, t_f in fock.generators.items():
                lhs = t_e.T @ t_f @ lower
                rhs = fock.vertex_projections[e.source] @ lower if e == f else csr_matrix(lhs.shape, dtype=np.int64)
                if (lhs != rhs).nnz:
                    logger.info("Toeplitz relation fails for %s, %s", e, f)
                    return False

        total = fock.level_projections[0].copy()
        for t_e in fock.generators.values():
            total = total + t_e @ t_e.T
        identity = diags(np.ones(fock.dimension, dtype=np.int64), format="csr", dtype=np.int64)
        return (total != identity).nnz == 0

    def path_operator(self, fock: TruncatedFock, path: Path) -> csr_matrix:
        """L_mu, applying the edges in traversal order"""
        operator = fock.vertex_projections[path.source]
        for edge in path.edges:
            operator = fock.generators[edge] @ operator
        return operator

    def operator_matrix(self, fock: TruncatedFock, m: Optional[Monomial]) -> csr_matrix:
        if m is None:
            return csr_matrix((fock.dimension, fock.dimension), dtype=np.int64)
        return self.path_operator(fock, m.mu) @ self.path_operator(fock, m.nu).T

    def canonicalization_check(self, fock: TruncatedFock, pairs: Sequence[MonomialPair]) -> bool:
        """Matrix products agree with symbolic products on basis vectors out of reach of the truncation"""
        for left, right in pairs:
            top = fock.depth - left.mu.length - right.mu.length
            if top < 0:
                continue
            lower = self._below_top(fock, top)
            product = self.operator_matrix(fock, left) @ self.operator_matrix(fock, right) @ lower
            expected = self.operator_matrix(fock, multiply(left, right)) @ lower
            if (product != expected).nnz:
                logger.info("canonical product mismatch for %s * %s", left, right)
                return False
        return True

    # Sampling

    def _walk(self, g: MultiGraph, start: int, length: int, rng: np.random.Generator, forward: bool) -> Path:
        edges: List[Edge] = []
        current = start
        for _ in range(length):
            if forward:
                options = graph_service.out_edges(g, current)
            else:
                options = [e for e in graph_service.edges(g) if e.range == current]
            if not options:
                break
            edge = options[int(rng.integers(len(options)))]
            edges.append(edge)
            current = edge.range if forward else edge.source
        if forward:
            return Path(start=start, edges=tuple(edges))
        return Path(start=current, edges=tuple(reversed(edges)))

    def _random_monomial(self, g: MultiGraph, rng: np.random.Generator, max_total: int) -> Monomial:
        u = int(rng.integers(g.n))
        a = int(rng.integers(max_total + 1))
        b = int(rng.integers(max_total - a + 1))
        return Monomial(mu=self._walk(g, u, a, rng, True), nu=self._walk(g, u, b, rng, True))

    def sample_monomials(self, g: MultiGraph, trials: int, max_total: int, seed: int) -> List[MonomialPair]:
        """Seeded pairs (f, g): independent, adjoint, or sharing a prefix so that fg is diagonal"""
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(trials):
            f = self._random_monomial(g, rng, max_total)
            mode = int(rng.integers(3))
            if mode == 0:
                h = self._random_monomial(g, rng, max_total)
            elif mode == 1:
                h = f.adjoint
            else:
                budget = max(0, max_total - f.mu.length - f.nu.length) // 2
                prefix = self._walk(g, f.nu.source, int(rng.integers(budget + 1)), rng, False)
                h = Monomial(mu=prefix.then(f.nu), nu=prefix.then(f.mu))
            pairs.append((f, h))
        return pairs

    # KMS residuals

    def kms_residual(
        self,
        g: MultiGraph,
        depth: int,
        tau: Trace,
        beta: float,
        kind: StateKind = StateKind.FINITE,
        trials: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> float:
        """max |phi(fg) - e^{-deg(f) beta} phi(gf)| over sampled monomial pairs, products taken symbolically"""
        trials = settings.DEFAULT_TRIALS if trials is None else trials
        seed = settings.DEFAULT_SEED if seed is None else seed
        evaluate = state_service.evaluator(g, tau, beta, kind)
        pairs = self.sample_monomials(g, trials, max(0, depth - 2), seed)
        return self.max_residual(evaluate, pairs, beta)

    def max_residual(self, evaluate: Callable, pairs: Sequence[MonomialPair], beta: float) -> float:
        worst = 0.0
        for f, h in pairs:
            twist = math.exp(-f.degree * beta)
            residual = abs(evaluate(multiply(f, h)) - twist * evaluate(multiply(h, f)))
            worst = max(worst, residual)
        return worst

    def _fock_weights(self, fock: TruncatedFock, tau: Trace, beta: float) -> np.ndarray:
        return np.array([math.exp(-path.length * beta) * tau.weights[path.source] for path in fock.basis])

    def fock_state_eval(self, fock: TruncatedFock, tau: Trace, beta: float, m: Optional[Monomial]) -> float:
        """Weighted vector state sum_lambda e^{-|lambda| beta} tau(s(lambda)) <xi_lambda, . xi_lambda>, normalized"""
        weights = self._fock_weights(fock, tau, beta)
        diagonal = self.operator_matrix(fock, m).diagonal()
        return float(weights @ diagonal) / float(weights.sum())

    def fock_kms_residual(self, fock: TruncatedFock, tau: Trace, beta: float, pairs: Sequence[MonomialPair]) -> float:
        """KMS residual of the truncated vector state, using matrix products"""
        weights = self._fock_weights(fock, tau, beta)
        total = float(weights.sum())
        worst = 0.0
        for f, h in pairs:
            mf, mh = self.operator_matrix(fock, f), self.operator_matrix(fock, h)
            forward = float(weights @ (mf @ mh).diagonal()) / total
            backward = float(weights @ (mh @ mf).diagonal()) / total
            worst = max(worst, abs(forward - math.exp(-f.degree * beta) * backward))
        return worst

    def level_mass_check(self, g: MultiGraph, fock: TruncatedFock, tau: Trace, beta: float) -> Tuple[float, float]:
        """
        Compare Phi(tau)(p_k) computed on the Fock basis with the closed form for k < depth.

        Returns the largest deviation and the mass 1 - sum_{k < depth} Phi(tau)(p_k) left in the tail.
        """
        c = state_service.c_series(g, tau, beta).value
        weights = self._fock_weights(fock, tau, beta)
        closed = state_service.level_masses(g, tau, beta, fock.depth - 1)
        numeric = [float(weights @ fock.level_projections[k].diagonal()) / c for k in range(fock.depth)]
        deviation = max(abs(a - b) for a, b in zip(numeric, closed))
        return deviation, 1.0 - math.fsum(numeric)

    def averaging_residual(self, g: MultiGraph, tau: Trace, beta: float) -> float:
        return spectral_service.averaging_residual(g, tau, beta)

    def norm_entropy_estimate(self, g: MultiGraph, k_max: int) -> List[NormEntropyPoint]:
        """(1/k) log of the largest number of length-k paths leaving one vertex"""
        if not 1 <= k_max <= 200:
            raise PreconditionError(f"k_max = {k_max} must lie in [1, 200]", field="k_max")
        points = []
        base = g.exact_matrix
        power = exact_matrix_power(base, 0)
        for k in range(1, k_max + 1):
            power = power @ base
            top = max(sum(int(c) for c in row) for row in power)
            if top == 0:
                points.append(NormEntropyPoint(k=k, value=0.0, vanished=True))
            else:
                points.append(NormEntropyPoint(k=k, value=math.log(top) / k))
        return points


# Singleton instance
fock_service = FockService()
