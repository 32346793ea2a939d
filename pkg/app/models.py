from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator
from typing import Optional, List, Dict, Tuple, Any, Sequence, Union
from enum import Enum
import math

import numpy as np

from app.config import settings
from app.errors import DuplicateLabelError, NegativeCountError, NonSquareMatrixError, GraphParseError


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True)


class Algebra(str, Enum):
    TOEPLITZ = "toeplitz"
    CUNTZ_PIMSNER = "cuntz_pimsner"
    OA = "oa"


class StateKind(str, Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    GROUND = "ground"


class SeriesMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    TRUNCATED = "truncated"
    DIVERGENT = "divergent"


def check_adjacency(labels: Sequence[str], matrix: Sequence[Sequence[Any]]) -> None:
    """Raise the matching parse error when labels/matrix violate the graph invariants"""
    if len(labels) == 0:
        raise GraphParseError("a graph needs at least one vertex", field="vertices")
    seen = set()
    for label in labels:
        if label in seen:
            raise DuplicateLabelError(f"duplicate vertex label '{label}'", field="vertices")
        seen.add(label)
    n = len(labels)
    if len(matrix) != n:
        raise NonSquareMatrixError(f"expected {n} rows, got {len(matrix)}", field="matrix")
    for i, row in enumerate(matrix):
        if len(row) != n:
            raise NonSquareMatrixError(f"row {i} has {len(row)} entries, expected {n}", field=f"matrix[{i}]")
        for j, entry in enumerate(row):
            if isinstance(entry, bool) or not isinstance(entry, (int, np.integer)):
                raise GraphParseError(f"edge count {entry!r} is not an integer", field=f"matrix[{i}][{j}]")
            if entry < 0:
                raise NegativeCountError(f"edge count {entry} is negative", field=f"matrix[{i}][{j}]")


# Graphs and paths

class MultiGraph(FrozenModel):
    """Finite directed multigraph; adjacency[i][j] counts the edges with source i and range j"""
    vertex_labels: Tuple[str, ...]
    adjacency: Tuple[Tuple[int, ...], ...]
    edge_labels: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _validate(self) -> "MultiGraph":
        check_adjacency(self.vertex_labels, self.adjacency)
        return self

    @property
    def n(self) -> int:
        return len(self.vertex_labels)

    @property
    def edge_count(self) -> int:
        return sum(sum(row) for row in self.adjacency)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=float)

    @property
    def exact_matrix(self) -> np.ndarray:
        """Object array of Python ints, for arbitrary-precision path counting"""
        exact = np.empty((self.n, self.n), dtype=object)
        for i, row in enumerate(self.adjacency):
            for j, entry in enumerate(row):
                exact[i, j] = int(entry)
        return exact

    def index_of(self, label: str) -> int:
        return self.vertex_labels.index(label)


class Edge(FrozenModel):
    source: int
    range: int
    index: int


class Path(FrozenModel):
    """Path stored in traversal order; the word mu_k...mu_1 reads `edges` right to left"""
    start: int
    edges: Tuple[Edge, ...] = ()

    @model_validator(mode="after")
    def _composable(self) -> "Path":
        if self.edges and self.edges[0].source != self.start:
            raise ValueError("first edge does not leave the start vertex")
        for before, after in zip(self.edges, self.edges[1:]):
            if before.range != after.source:
                raise ValueError("edges are not composable")
        return self

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def source(self) -> int:
        return self.start

    @property
    def range(self) -> int:
        return self.edges[-1].range if self.edges else self.start

    def then(self, other: "Path") -> "Path":
        """Traverse self, then other"""
        if self.range != other.source:
            raise ValueError("paths are not composable")
        return Path(start=self.start, edges=self.edges + other.edges)

    def split(self, head_length: int) -> Tuple["Path", "Path"]:
        head = Path(start=self.start, edges=self.edges[:head_length])
        tail = Path(start=head.range, edges=self.edges[head_length:])
        return head, tail


class Component(FrozenModel):
    index: int
    vertices: Tuple[int, ...]
    is_zero: bool
    is_sink: bool


class ComponentDecomposition(FrozenModel):
    """Strongly connected components in block upper triangular order"""
    components: Tuple[Component, ...]
    order: Tuple[int, ...]
    vertex_component: Tuple[int, ...]
    condensation: Tuple[Tuple[int, int], ...]

    @property
    def m(self) -> int:
        return len(self.components)

    def successors(self, component: int) -> Tuple[int, ...]:
        return tuple(r for s, r in self.condensation if s == component)


# Traces and spectra

class Trace(FrozenModel):
    """Probability vector over the vertices (tracial state on the diagonal)"""
    weights: Tuple[float, ...]

    @field_validator("weights")
    @classmethod
    def _probability(cls, weights: Tuple[float, ...]) -> Tuple[float, ...]:
        if not weights:
            raise ValueError("a trace needs at least one weight")
        for w in weights:
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"trace weight {w} is not a nonnegative real")
        if abs(math.fsum(weights) - 1.0) > settings.TRACE_SUM_TOLERANCE:
            raise ValueError(f"trace weights sum to {math.fsum(weights)!r}, not 1")
        return weights

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > settings.SUPPORT_EPSILON)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @classmethod
    def dirac(cls, n: int, vertex: int) -> "Trace":
        weights = [0.0] * n
        weights[vertex] = 1.0
        return cls(weights=tuple(weights))

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "Trace":
        """Clip entries below the support epsilon to zero and renormalize"""
        values = np.asarray(vector, dtype=float).copy()
        values[np.abs(values) <= settings.SUPPORT_EPSILON] = 0.0
        values = np.clip(values, 0.0, None)
        total = math.fsum(values)
        if total <= 0:
            raise ValueError("cannot normalize a zero vector")
        return cls(weights=tuple(float(v) for v in values / total))

    def as_dict(self, labels: Sequence[str]) -> Dict[str, float]:
        return {labels[i]: self.weights[i] for i in self.support}


class SpectralResult(FrozenModel):
    radius: float
    eigvec: Optional[Tuple[float, ...]] = None
    residual: float = 0.0
    iterations: int = 0


class TracePolytope(FrozenModel):
    beta: float
    extreme_points: Tuple[Trace, ...] = ()

    @computed_field
    @property
    def dimension(self) -> int:
        return len(self.extreme_points) - 1


# Entropy and phase structure

class EntropyReport(FrozenModel):
    h_strong: float
    h_min: float
    per_vertex: Dict[str, float]
    per_component: Dict[int, float]
    h_strong_pretty: str = ""
    h_min_pretty: str = ""


class LambdaMaximal(FrozenModel):
    component: int
    lam: float
    beta_zero_boundary: bool


class Transition(FrozenModel):
    beta: float
    lam: float
    components: Tuple[int, ...]
    boundary: bool = False
    communicating_vertices: Tuple[str, ...] = ()
    pretty: str = ""


class PhaseInterval(FrozenModel):
    """Half-open interval (lo, hi]; hi=None stands for +infinity"""
    lo: float
    hi: Optional[float] = None
    allowed: Tuple[str, ...] = ()

    def contains(self, beta: float, slack: float = 1e-12) -> bool:
        if beta <= self.lo:
            return False
        return self.hi is None or beta <= self.hi + slack


class PhaseDiagram(FrozenModel):
    transitions: Tuple[Transition, ...]
    intervals: Tuple[PhaseInterval, ...]

    @computed_field
    @property
    def includes_beta_zero_entry(self) -> bool:
        return any(t.boundary for t in self.transitions)

    def allowed_at(self, beta: float) -> Tuple[str, ...]:
        for interval in self.intervals:
            if interval.contains(beta):
                return interval.allowed
        return ()


# States

class Monomial(FrozenModel):
    """Generator product L_mu L_nu^*; mu = nu = empty path at v encodes the vertex projection"""
    mu: Path
    nu: Path

    @classmethod
    def vertex(cls, v: int) -> "Monomial":
        empty = Path(start=v)
        return cls(mu=empty, nu=empty)

    @classmethod
    def creation(cls, mu: Path) -> "Monomial":
        return cls(mu=mu, nu=Path(start=mu.source))

    @classmethod
    def annihilation(cls, nu: Path) -> "Monomial":
        return cls(mu=Path(start=nu.source), nu=nu)

    @property
    def adjoint(self) -> "Monomial":
        return Monomial(mu=self.nu, nu=self.mu)

    @property
    def degree(self) -> int:
        return self.mu.length - self.nu.length


class SeriesValue(FrozenModel):
    value: float
    method: SeriesMethod
    tail_bound: float = 0.0
    truncated_value: Optional[float] = None
    terms: int = 0
    certified: bool = True

    @computed_field
    @property
    def diverges(self) -> bool:
        return math.isinf(self.value)


class FiniteExtreme(FrozenModel):
    vertex: str
    trace: Trace
    c: float
    c_certified: bool = True


class SimplexDescription(FrozenModel):
    beta: float
    algebra: Algebra
    finite_extremes: Tuple[FiniteExtreme, ...] = ()
    infinite_extremes: Tuple[Trace, ...] = ()

    @computed_field
    @property
    def dimension(self) -> int:
        return len(self.finite_extremes) + len(self.infinite_extremes) - 1

    @computed_field
    @property
    def empty(self) -> bool:
        return self.dimension < 0


class ConvexCheckReport(FrozenModel):
    max_deviation: float
    c_deviation: float
    c_mixture: float
    c_combined: float


class GroundStates(FrozenModel):
    algebra: Algebra
    extremes: Tuple[Trace, ...]
    vertices: Tuple[str, ...]
    labels: Tuple[str, ...] = ("ground", "kms_infinity")


class StateEvaluation(FrozenModel):
    beta: float
    kind: StateKind
    values: Tuple[float, ...]
    c: Optional[float] = None


# Fock space verification

class TruncatedFock(BaseModel):
    """Fock space cut at depth N with integer generator matrices"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    depth: int
    basis: Tuple[Path, ...]
    index: Dict[Path, int]
    generators: Dict[Edge, Any]
    vertex_projections: Tuple[Any, ...]
    level_projections: Tuple[Any, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)


class NormEntropyPoint(FrozenModel):
    k: int
    value: Optional[float] = None
    vanished: bool = False


class VerifyReport(FrozenModel):
    relations_exact: bool
    canonicalization_exact: bool
    kms_max_residual: float
    averaging_residual: Optional[float] = None
    fock_kms_residual: Optional[float] = None
    vector_state_deviation: Optional[float] = None
    level_mass_deviation: Optional[float] = None
    level_mass_tail: Optional[float] = None
    norm_entropy: Tuple[NormEntropyPoint, ...] = ()
    N: int
    seed: int
    trials: int
    states_checked: int


# Reports

class AnalysisReport(FrozenModel):
    graph: Dict[str, Any]
    components: List[Dict[str, Any]]
    entropy: EntropyReport
    phase: PhaseDiagram
    simplices: Tuple[SimplexDescription, ...] = ()
    ground_states: Tuple[GroundStates, ...] = ()
    verification: Tuple[VerifyReport, ...] = ()


class SweepRow(FrozenModel):
    beta: float
    algebra: Algebra
    finite_dim: int
    infinite_dim: int
    total_dim: int


# Input documents

class EdgeSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(alias="from")
    target: str = Field(alias="to")
    count: int = 1
    label: Optional[str] = None
    labels: Optional[List[str]] = None


class GraphDocument(BaseModel):
    vertices: List[str]
    matrix: Optional[List[List[int]]] = None
    edges: Optional[List[EdgeSpec]] = None


class MonomialSpec(BaseModel):
    mu: List[str] = []
    nu: List[str] = []
    vertex: Optional[str] = None


class StateQuery(BaseModel):
    beta: Union[float, str]
    trace: Dict[str, float]
    monomials: List[MonomialSpec] = []
    kind: str = "auto"
    algebra: str = "toeplitz"


class AnalyzeRequest(BaseModel):
    graph: GraphDocument
    betas: List[Union[float, str]] = []
    algebra: str = "all"
    verify: bool = False


class SweepRequest(BaseModel):
    graph: GraphDocument
    range: str
    algebra: str = "all"


class EvalStateRequest(BaseModel):
    graph: GraphDocument
    query: StateQuery


class VerifyRequest(BaseModel):
    graph: GraphDocument
    beta: Union[float, str]
    depth: int = 6
    trials: int = 200
    seed: int = 0
    entropy_steps: int = 30
