import itertools
import logging
import math
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from app.config import settings
from app.errors import BetaParseError, ConsistencyError, ConvergenceError, PreconditionError
from app.models import MultiGraph, SpectralResult, Trace, TracePolytope
from app.services.graph_service import graph_service, tarjan

logger = logging.getLogger(__name__)


def parse_beta(value: Union[float, int, str], field: str = "beta") -> float:
    """Inverse temperature from a real or from `log:<x>` (natural log of x)"""
    if isinstance(value, bool):
        raise BetaParseError(f"'{value}' is not an inverse temperature", field=field)
    if isinstance(value, (int, float)):
        beta = float(value)
    else:
        text = value.strip()
        try:
            if text.startswith("log:"):
                argument = float(text[4:])
                if argument <= 0:
                    raise BetaParseError(f"log argument {argument} must be positive", field=field)
                beta = math.log(argument)
            else:
                beta = float(text)
        except ValueError:
            raise BetaParseError(f"'{value}' is neither a real nor log:<x>", field=field)
    if not math.isfinite(beta):
        raise BetaParseError(f"'{value}' is not finite", field=field)
    return beta


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise PreconditionError(f"expected a nonempty square matrix, got shape {a.shape}", field="matrix")
    if (a < 0).any():
        raise PreconditionError("matrix has negative entries", field="matrix")
    return a


def irreducible_blocks(a: np.ndarray) -> List[List[int]]:
    """Index sets of the strongly connected components of the support of `a`"""
    n = a.shape[0]
    neighbours = lambda v: [j for j in range(n) if a[v, j] > 0]
    return [sorted(scc) for scc in tarjan(range(n), neighbours)]


def is_nilpotent(a: np.ndarray) -> bool:
    """m^n = 0, tested on the boolean support"""
    support = (a > 0).astype(np.int64)
    power = support.copy()
    for _ in range(a.shape[0] - 1):
        power = ((power @ support) > 0).astype(np.int64)
        if not power.any():
            return True
    return not power.any()


class SpectralService:
    """Perron-Frobenius data of nonnegative matrices and averaging-trace polytopes"""

    def _power_iteration(self, block: np.ndarray) -> Tuple[float, np.ndarray, int]:
        # Shifting by the identity makes an irreducible block primitive
        shifted = block + np.eye(block.shape[0])
        x = np.full(block.shape[0], 1.0 / block.shape[0])
        tol = settings.SPECTRAL_TOLERANCE
        for iteration in range(1, settings.SPECTRAL_MAX_ITERATIONS + 1):
            y = shifted @ x
            ratios = y / x
            lo, hi = float(ratios.min()), float(ratios.max())
            x = y / y.sum()
            if hi - lo <= tol * max(1.0, hi):
                return 0.5 * (lo + hi) - 1.0, x, iteration
        logger.error("power iteration did not converge on a %d x %d block", *block.shape)
        raise ConvergenceError(
            f"power iteration did not converge in {settings.SPECTRAL_MAX_ITERATIONS} iterations",
            last_iterate=x.tolist(),
        )

    def _polish(self, block: np.ndarray, estimate: float) -> float:
        """Snap to the nearest real eigenvalue of the block when it agrees with the estimate"""
        eigenvalues = np.linalg.eigvals(block)
        scale = max(1.0, estimate)
        real = [ev.real for ev in eigenvalues if abs(ev.imag) <= 1e-9 * scale]
        if not real:
            return estimate
        nearest = min(real, key=lambda ev: abs(ev - estimate))
        if abs(nearest - estimate) <= 1e-6 * scale:
            return float(nearest)
        return estimate

    def spectral_radius(self, m) -> SpectralResult:
        a = _as_square(m)
        if a.shape[0] == 1:
            return SpectralResult(radius=float(a[0, 0]))
        if is_nilpotent(a):
            return SpectralResult(radius=0.0)

        radius, iterations = 0.0, 0
        for block in irreducible_blocks(a):
            sub = a[np.ix_(block, block)]
            if len(block) == 1:
                radius = max(radius, float(sub[0, 0]))
                continue
            estimate, _, used = self._power_iteration(sub)
            iterations += used
            radius = max(radius, self._polish(sub, estimate))
        logger.debug("spectral radius %.15g after %d iterations", radius, iterations)
        return SpectralResult(radius=radius, iterations=iterations)

    def pf_eigenvector(self, m, transpose: bool = False) -> SpectralResult:
        """Positive l1-normalized eigenvector at the spectral radius of an irreducible matrix"""
        a = _as_square(m)
        if transpose:
            a = a.T.copy()
        if len(irreducible_blocks(a)) != 1:
            raise PreconditionError("matrix is reducible", field="matrix")
        if not a.any():
            raise PreconditionError("matrix is zero", field="matrix")

        n = a.shape[0]
        if n == 1:
            return SpectralResult(radius=float(a[0, 0]), eigvec=(1.0,), residual=0.0)

        estimate, iterate, iterations = self._power_iteration(a)
        radius = self._polish(a, estimate)

        # The eigenspace is one-dimensional; the SVD gives a cleaner basis vector
        _, _, vh = scipy.linalg.svd(a - radius * np.eye(n))
        candidate = vh[-1]
        candidate = candidate if candidate.sum() > 0 else -candidate
        if (candidate > 0).all():
            vector = candidate / candidate.sum()
        else:
            vector = iterate / iterate.sum()

        residual = float(np.abs(a @ vector - radius * vector).max())
        if residual > settings.EIGENVALUE_MATCH_TOLERANCE * max(1.0, radius):
            logger.error("Perron-Frobenius residual %.3g too large", residual)
            raise ConvergenceError(f"eigenvector residual {residual:.3g} exceeds tolerance", last_iterate=vector.tolist())
        return SpectralResult(
            radius=radius,
            eigvec=tuple(float(v) for v in vector),
            residual=residual,
            iterations=iterations,
        )

    def nullspace(self, a: np.ndarray, tol: float) -> np.ndarray:
        """Orthonormal basis (columns) of the null space; singular values <= tol count as zero"""
        _, s, vh = scipy.linalg.svd(a)
        rank = int((s > tol).sum())
        return vh[rank:].T.conj()

    def avt_extreme_points(self, g: MultiGraph, beta: float) -> TracePolytope:
        """Extreme points of {tau >= 0 : G^T tau = e^beta tau, sum tau = 1}"""
        if beta < 0:
            raise PreconditionError(f"beta = {beta} is negative", field="beta")
        gt = g.matrix.T
        scale = math.exp(beta)
        system = gt - scale * np.eye(g.n)
        basis = self.nullspace(system, settings.NULLSPACE_TOLERANCE * max(1.0, scale, float(gt.max(initial=0.0))))
        nullity = basis.shape[1]
        logger.debug("averaging nullspace at beta=%.6g has dimension %d", beta, nullity)
        if nullity == 0:
            return TracePolytope(beta=beta)

        # Basic feasible solutions: nullity - 1 zero coordinates plus the normalization
        normalization = basis.sum(axis=0)
        rhs = np.zeros(nullity)
        rhs[-1] = 1.0
        found: List[np.ndarray] = []
        for zeros in itertools.combinations(range(g.n), nullity - 1):
            rows = np.vstack([basis[list(zeros)], normalization]) if zeros else normalization[None, :]
            if np.linalg.cond(rows) > 1e12:
                continue
            tau = basis @ scipy.linalg.solve(rows, rhs)
            if tau.min() < -settings.AVERAGING_TOLERANCE:
                continue
            tau[np.abs(tau) <= settings.AVERAGING_TOLERANCE * max(1.0, float(np.abs(tau).max()))] = 0.0
            if not any(np.abs(tau - seen).max() <= settings.EXTREME_DISTINCT_TOLERANCE for seen in found):
                found.append(tau)

        # The rank cut admits directions that are only nearly null just off a transition;
        # those fail the averaging equation and are not traces at this beta
        candidates = [Trace.from_vector(tau) for tau in found]
        accepted = [t for t in candidates if self.averaging_residual(g, t, beta) <= settings.AVERAGING_TOLERANCE]
        if len(accepted) < len(candidates):
            logger.debug(
                "dropped %d near-null directions at beta=%.12g", len(candidates) - len(accepted), beta
            )
        extremes = sorted(accepted, key=lambda t: tuple(-round(w, 12) for w in t.weights))
        self._check_extremes(g, extremes)
        return TracePolytope(beta=beta, extreme_points=tuple(extremes))

    def _check_extremes(self, g: MultiGraph, extremes: Sequence[Trace]) -> None:
        dec = graph_service.scc_decompose(g)
        ideal = graph_service.ideal_i_vertices(g, dec)
        for tau in extremes:
            if any(tau.weights[v] > 0 for v in ideal):
                raise ConsistencyError("averaging trace charges a vertex no cycle reaches", field="beta")

    def averaging_residual(self, g: MultiGraph, tau: Trace, beta: float) -> float:
        """||e^beta tau - G^T tau||_inf"""
        vector = tau.vector
        return float(np.abs(math.exp(beta) * vector - g.matrix.T @ vector).max())


# Singleton instance
spectral_service = SpectralService()
