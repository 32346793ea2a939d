import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from app.config import settings
from app.errors import ConsistencyError
from app.models import (
    ComponentDecomposition,
    EntropyReport,
    LambdaMaximal,
    MultiGraph,
    PhaseDiagram,
    PhaseInterval,
    Trace,
    Transition,
)
from app.services.graph_service import graph_service
from app.services.spectral_service import spectral_service

logger = logging.getLogger(__name__)


def same_radius(a: float, b: float) -> bool:
    if float(a).is_integer() and float(b).is_integer():
        return a == b
    return abs(a - b) <= settings.EIGENVALUE_MATCH_TOLERANCE * max(1.0, a, b)


def lambda_entropy(lam: float) -> float:
    """log(lambda) for lambda >= 1; 0 when path counts vanish eventually"""
    return math.log(lam) if lam >= 1.0 else 0.0


def pretty_log(value: float) -> str:
    """'log 3' when e^value is an integer, else the decimal value"""
    if value == 0:
        return "0"
    exponent = math.exp(value)
    nearest = round(exponent)
    if nearest >= 2 and abs(exponent - nearest) <= 1e-9 * max(1.0, exponent):
        return f"log {nearest}"
    return f"{value:.12g}"


class EntropyService:
    """Entropies, lambda-maximal components and phase diagrams of graph correspondences"""

    def component_radii(self, g: MultiGraph, dec: Optional[ComponentDecomposition] = None) -> List[float]:
        dec = dec or graph_service.scc_decompose(g)
        radii = []
        for component in dec.components:
            if component.is_zero:
                radii.append(0.0)
                continue
            block = g.matrix[list(component.vertices)][:, list(component.vertices)]
            radii.append(spectral_service.spectral_radius(block).radius)
        return radii

    def vertex_lambdas(
        self,
        g: MultiGraph,
        dec: Optional[ComponentDecomposition] = None,
        radii: Optional[Sequence[float]] = None,
    ) -> List[float]:
        """lambda_v: the largest radius among nonzero components reachable from v (0 if none)"""
        dec = dec or graph_service.scc_decompose(g)
        radii = radii if radii is not None else self.component_radii(g, dec)
        lambdas = []
        for v in range(g.n):
            reached = graph_service.reachable_component_set(dec, vertex=v)
            lambdas.append(max((radii[r] for r in reached if not dec.components[r].is_zero), default=0.0))
        return lambdas

    def vertex_entropies(self, g: MultiGraph) -> List[float]:
        return [lambda_entropy(lam) for lam in self.vertex_lambdas(g)]

    def strong_entropy(self, g: MultiGraph) -> float:
        dec = graph_service.scc_decompose(g)
        radii = self.component_radii(g, dec)
        return max((math.log(r) for r, c in zip(radii, dec.components) if not c.is_zero), default=0.0)

    def entropy_hx(self, g: MultiGraph) -> float:
        """0 with a zero sink component, else the smallest log radius over the sink components"""
        dec = graph_service.scc_decompose(g)
        sinks = [c for c in dec.components if c.is_sink]
        if any(c.is_zero for c in sinks):
            return 0.0
        radii = self.component_radii(g, dec)
        return min(math.log(radii[c.index]) for c in sinks)

    def entropy_hx_from_traces(self, g: MultiGraph) -> float:
        """h_X as max(0, min over Dirac traces of the trace entropy)"""
        return max(0.0, min(self.vertex_entropies(g)))

    def trace_entropy(self, g: MultiGraph, tau: Trace) -> float:
        entropies = self.vertex_entropies(g)
        return max((entropies[v] for v in tau.support), default=0.0)

    def trace_entropy_estimate(self, g: MultiGraph, tau: Trace, k: int) -> Optional[float]:
        """(1/k) log of the tau-weighted number of length-k paths; None once the counts vanish"""
        if k < 1:
            raise ValueError("k must be positive")
        power = graph_service.path_count_matrix(g, k)
        logs = []
        for v in tau.support:
            count = sum(int(c) for c in power[v])
            if count > 0:
                logs.append(math.log(tau.weights[v]) + math.log(count))
        if not logs:
            return None
        top = max(logs)
        return (top + math.log(math.fsum(math.exp(x - top) for x in logs))) / k

    def lambda_maximal_components(self, g: MultiGraph, include_zero: bool = False) -> List[LambdaMaximal]:
        """
        Components dominating everything they communicate with.

        With include_zero, zero components reaching only zero components are added
        as beta = 0 boundary entries with lam = 0.
        """
        dec = graph_service.scc_decompose(g)
        radii = self.component_radii(g, dec)
        maximal = []
        for component in dec.components:
            s = component.index
            reached = graph_service.reachable_component_set(dec, component=s)
            if component.is_zero:
                if include_zero and all(dec.components[r].is_zero for r in reached):
                    maximal.append(LambdaMaximal(component=s, lam=0.0, beta_zero_boundary=True))
                continue
            lam = radii[s]
            if lam < 1.0:
                continue
            if all(lam >= radii[r] or same_radius(lam, radii[r]) for r in reached):
                maximal.append(LambdaMaximal(component=s, lam=lam, beta_zero_boundary=lam <= 1.0))
        return maximal

    def _allowed(self, g: MultiGraph, entropies: Sequence[float], beta: float) -> Tuple[str, ...]:
        slack = settings.ADMISSIBILITY_SLACK
        return tuple(g.vertex_labels[v] for v in range(g.n) if entropies[v] < beta - slack)

    def phase_diagram(self, g: MultiGraph) -> PhaseDiagram:
        dec = graph_service.scc_decompose(g)
        entropies = self.vertex_entropies(g)
        maximal = self.lambda_maximal_components(g, include_zero=True)

        transitions: List[Transition] = []
        boundary = sorted(m.component for m in maximal if m.beta_zero_boundary)
        if boundary:
            logger.info("beta = 0 boundary entries for components %s", boundary)
            transitions.append(
                Transition(
                    beta=0.0,
                    lam=1.0,
                    components=tuple(boundary),
                    boundary=True,
                    communicating_vertices=self._communicating_vertices(g, dec, boundary),
                    pretty="0",
                )
            )

        groups: List[List[LambdaMaximal]] = []
        for entry in sorted((m for m in maximal if not m.beta_zero_boundary), key=lambda m: m.lam):
            if groups and same_radius(groups[-1][0].lam, entry.lam):
                groups[-1].append(entry)
            else:
                groups.append([entry])
        for group in groups:
            lam = group[0].lam
            components = sorted(m.component for m in group)
            beta = math.log(lam)
            transitions.append(
                Transition(
                    beta=beta,
                    lam=lam,
                    components=tuple(components),
                    communicating_vertices=self._communicating_vertices(g, dec, components),
                    pretty=pretty_log(beta),
                )
            )

        breakpoints = [t.beta for t in transitions if not t.boundary]
        intervals = []
        lows = [0.0] + breakpoints
        highs: List[Optional[float]] = breakpoints + [None]
        for lo, hi in zip(lows, highs):
            width = (hi - lo) if hi is not None else 1.0
            samples = [lo + width * k / 6 for k in range(1, 6)]
            if hi is not None:
                samples.append(hi)
            sets = {self._allowed(g, entropies, beta) for beta in samples}
            if len(sets) != 1:
                logger.error("allowed vertex sets vary on (%g, %s]", lo, hi)
                raise ConsistencyError(f"allowed vertex sets are not constant on ({lo}, {hi}]", field="phase")
            intervals.append(PhaseInterval(lo=lo, hi=hi, allowed=sets.pop()))

        return PhaseDiagram(transitions=tuple(transitions), intervals=tuple(intervals))

    def _communicating_vertices(
        self, g: MultiGraph, dec: ComponentDecomposition, components: Sequence[int]
    ) -> Tuple[str, ...]:
        """Vertices from which one of `components` can be reached"""
        targets = set(components)
        return tuple(
            g.vertex_labels[v]
            for v in range(g.n)
            if graph_service.reachable_component_set(dec, vertex=v) & targets
        )

    def entropy_report(self, g: MultiGraph) -> EntropyReport:
        dec = graph_service.scc_decompose(g)
        radii = self.component_radii(g, dec)
        lambdas = self.vertex_lambdas(g, dec, radii)
        h_strong = self.strong_entropy(g)
        h_min = self.entropy_hx(g)
        return EntropyReport(
            h_strong=h_strong,
            h_min=h_min,
            per_vertex={g.vertex_labels[v]: lambdas[v] for v in range(g.n)},
            per_component={c.index: radii[c.index] for c in dec.components},
            h_strong_pretty=pretty_log(h_strong),
            h_min_pretty=pretty_log(h_min),
        )


# Singleton instance
entropy_service = EntropyService()
