from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

from hyperfill.domain.kinds import CheckName, CheckStatus, CorpusKind, EdgeKind
from hyperfill.domain.rules import validate_besov, validate_filling

HORIZONTAL = 0
VERTICAL = 1
TAIL = 2
EDGE_KINDS_BY_CODE = (EdgeKind.HORIZONTAL, EdgeKind.VERTICAL, EdgeKind.TAIL)


@dataclass(frozen=True, eq=False)
class PointCloudSpace:
    ids: tuple[str, ...]
    dist: np.ndarray
    weights: np.ndarray
    coords: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.ids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {point_id: i for i, point_id in enumerate(self.ids)}

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.size > 1 else 0.0

    @cached_property
    def min_distance(self) -> float:
        if self.size < 2:
            return 0.0
        off = self.dist[~np.eye(self.size, dtype=bool)]
        return float(off.min())

    @cached_property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def pair_ball_mass(self) -> np.ndarray:
        """nu(B(x, d(x, y))) for every ordered pair, open balls."""
        order = np.argsort(self.dist, axis=1, kind="stable")
        sorted_dist = np.take_along_axis(self.dist, order, axis=1)
        cumulative = np.cumsum(self.weights[order], axis=1)
        out = np.empty_like(self.dist)
        for x in range(self.size):
            # mass of points strictly closer than d(x, y)
            below = np.searchsorted(sorted_dist[x], self.dist[x], side="left")
            out[x] = np.where(below > 0, cumulative[x][np.maximum(below - 1, 0)], 0.0)
        return out


@dataclass(frozen=True)
class ExponentEstimates:
    c_nu: float
    q: float
    c_low: float
    eta: float
    c_rev: float


@dataclass(frozen=True)
class FillingParams:
    alpha: float
    tau: float
    n_min: int
    n_max: int

    def __post_init__(self) -> None:
        validate_filling(self.alpha, self.tau, self.n_min, self.n_max)

    def scale(self, n: int) -> float:
        return float(self.alpha ** (-n))

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)


@dataclass(frozen=True, eq=False)
class Net:
    params: FillingParams
    centers: dict[int, tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class FillingGraph:
    space: PointCloudSpace
    params: FillingParams
    net: Net
    vertex_level: np.ndarray
    vertex_center: np.ndarray
    vertex_radius: np.ndarray
    membership: np.ndarray
    edges: np.ndarray
    edge_kind: np.ndarray
    level_vertices: dict[int, np.ndarray]
    anchors: dict[int, np.ndarray]
    graph: nx.Graph

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_level)

    def vertex_id(self, v: int) -> str:
        return f"{self.space.ids[self.vertex_center[v]]}@{self.vertex_level[v]}"


@dataclass(frozen=True)
class Hull:
    center: int
    radius: float
    vertices: np.ndarray
    full_edges: np.ndarray
    half_edges: np.ndarray
    half_toward_a: np.ndarray

    @property
    def is_empty(self) -> bool:
        return self.vertices.size == 0


@dataclass(frozen=True, eq=False)
class UniformizedGraph:
    filling: FillingGraph
    edges: np.ndarray
    edge_kind: np.ndarray
    edge_level: np.ndarray
    rho_length: np.ndarray
    distances: np.ndarray
    hops: np.ndarray
    graph: nx.Graph

    @property
    def alpha(self) -> float:
        return self.filling.params.alpha

    @property
    def n_interior(self) -> int:
        return self.filling.n_vertices

    @property
    def n_total(self) -> int:
        return self.n_interior + self.filling.space.size

    def boundary_vertex(self, point: int) -> int:
        return self.n_interior + point

    def is_boundary(self, vertex: int) -> bool:
        return vertex >= self.n_interior

    def vertex_id(self, vertex: int) -> str:
        if self.is_boundary(vertex):
            return f"{self.filling.space.ids[vertex - self.n_interior]}@inf"
        return self.filling.vertex_id(vertex)

    @cached_property
    def vertex_ids(self) -> tuple[str, ...]:
        return tuple(self.vertex_id(v) for v in range(self.n_total))

    @cached_property
    def full_tail_length(self) -> np.ndarray:
        """rho-length of the infinite ascending ray leaving each edge's coarse end."""
        alpha = self.alpha
        return alpha ** (-self.edge_level.astype(float)) / math.log(alpha)


@dataclass(frozen=True, eq=False)
class LiftedMeasure:
    beta: float
    alpha: float
    vertex_mass: np.ndarray
    edge_weight: np.ndarray
    edge_mass: np.ndarray

    @property
    def total(self) -> float:
        return float(self.edge_mass.sum())


@dataclass(frozen=True)
class BesovParams:
    p: float
    theta: float

    def __post_init__(self) -> None:
        validate_besov(self.p, self.theta)

    @property
    def beta(self) -> float:
        return self.p * (1.0 - self.theta)

    def q_beta(self, q: float) -> float:
        return max(1.0, q + self.beta)

    def q_star(self, q: float) -> float | None:
        if self.p * self.theta >= q:
            return None
        return q * self.p / (q - self.p * self.theta)


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    values: np.ndarray
    name: str = ""


@dataclass(frozen=True, eq=False)
class GraphFunction:
    values: np.ndarray
    name: str = ""


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    level: int
    vertices: np.ndarray
    matrix: np.ndarray
    lipschitz_constant: float


@dataclass(frozen=True, eq=False)
class TraceResult:
    levels: tuple[int, ...]
    partial: dict[int, np.ndarray]
    trace: np.ndarray
    step_decay: tuple[float, ...]
    tail_decay: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    f: BoundaryFunction
    pf: GraphFunction
    cutoff: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CorpusFunction:
    kind: CorpusKind
    function: BoundaryFunction


@dataclass(frozen=True, eq=False)
class Corpus:
    seed: int
    members: tuple[CorpusFunction, ...]

    @property
    def functions(self) -> list[BoundaryFunction]:
        return [member.function for member in self.members]


@dataclass(frozen=True)
class ReportRow:
    param1: str
    param2: str
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    r2: float


@dataclass(frozen=True)
class ReportSummary:
    name: str
    min: float
    max: float
    geomean: float
    count: int


@dataclass(frozen=True)
class ReportTable:
    name: str
    rows: tuple[ReportRow, ...]
    slope: SlopeFit | None = None
    notes: tuple[str, ...] = ()

    @property
    def summary(self) -> ReportSummary:
        ratios = [row.ratio for row in self.rows if math.isfinite(row.ratio)]
        positive = [r for r in ratios if r > 0]
        infinite = any(math.isinf(row.ratio) for row in self.rows)
        if not ratios and not infinite:
            return ReportSummary(self.name, math.nan, math.nan, math.nan, 0)
        geomean = math.exp(sum(math.log(r) for r in positive) / len(positive)) if positive else 0.0
        high = math.inf if infinite else max(ratios)
        low = min(ratios) if ratios else math.inf
        return ReportSummary(self.name, low, high, geomean, len(self.rows))


@dataclass(frozen=True)
class CheckResult:
    name: CheckName
    status: CheckStatus
    table: ReportTable | None
    reason: str
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status != CheckStatus.FAILED
