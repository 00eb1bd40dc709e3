from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import networkx as nx
import numpy as np

from hyperfill.domain.models import (
    HORIZONTAL,
    TAIL,
    VERTICAL,
    FillingGraph,
    FillingParams,
    Hull,
    Net,
    PointCloudSpace,
    UniformizedGraph,
)
from hyperfill.domain.rules import ConsistencyError, ValidationError, validate_filling

DEFAULT_ALPHA = 2.0
DEFAULT_TAU = 4.0
LEVELS_PAST_SATURATION = 2
SINGLE_POINT_LEVELS = (0, 2)


@dataclass(frozen=True)
class DegreeStats:
    max_degree: int
    per_level_max: dict[int, int]
    histogram: dict[int, int]


def net_order(space: PointCloudSpace) -> list[int]:
    """Ascending point id; numeric ids compare as numbers."""

    def key(i: int) -> tuple:
        parts = re.split(r"(\d+)", space.ids[i])
        return tuple((0, int(part)) if part.isdigit() else (1, part) for part in parts)

    return sorted(range(space.size), key=key)


def saturation_level(space: PointCloudSpace, alpha: float) -> int:
    """Smallest n with alpha^-n <= min positive distance: from there on S_n = Z."""
    if space.size < 2:
        return SINGLE_POINT_LEVELS[0]
    n = math.ceil(-math.log(space.min_distance) / math.log(alpha))
    while alpha ** (-(n - 1)) <= space.min_distance:
        n -= 1
    while alpha ** (-n) > space.min_distance:
        n += 1
    return n


def root_level(space: PointCloudSpace, alpha: float) -> int:
    """Largest n with alpha^-n > diameter, where the net is a single point."""
    if space.size < 2:
        return SINGLE_POINT_LEVELS[0]
    n = math.floor(-math.log(space.diameter) / math.log(alpha))
    while alpha ** (-n) <= space.diameter:
        n -= 1
    while alpha ** (-(n + 1)) > space.diameter:
        n += 1
    return n


def bulk_levels(graph: FillingGraph) -> range:
    """Levels whose balls are smaller than Z while the nets still grow.

    Coarser levels hold balls covering Z; finer levels repeat the saturated net.
    """
    space, params = graph.space, graph.params
    if space.size < 2:
        return params.levels
    alpha, tau = params.alpha, params.tau
    first = math.floor(math.log(tau / space.diameter) / math.log(alpha))
    while tau * alpha ** (-first) >= space.diameter:
        first += 1
    while tau * alpha ** (-(first - 1)) < space.diameter:
        first -= 1
    first = min(max(first, params.n_min), params.n_max)
    last = min(max(saturation_level(space, alpha), first), params.n_max)
    return range(first, last + 1)


def resolve_params(
    space: PointCloudSpace,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    n_min: int | None = None,
    n_max: int | None = None,
) -> FillingParams:
    validate_filling(alpha, tau, n_min, n_max)
    if space.size < 2:
        lo, hi = SINGLE_POINT_LEVELS
    else:
        lo = root_level(space, alpha)
        hi = saturation_level(space, alpha) + LEVELS_PAST_SATURATION
    n_min = lo if n_min is None else n_min
    n_max = max(hi, n_min) if n_max is None else n_max
    return FillingParams(alpha=float(alpha), tau=float(tau), n_min=n_min, n_max=n_max)


def build_nets(space: PointCloudSpace, params: FillingParams) -> Net:
    order = net_order(space)
    centers: dict[int, tuple[int, ...]] = {}
    for n in params.levels:
        r = params.scale(n)
        nearest = np.full(space.size, np.inf)
        chosen: list[int] = []
        for z in order:
            if nearest[z] >= r:
                chosen.append(z)
                nearest = np.minimum(nearest, space.dist[z])
        centers[n] = tuple(chosen)
    return Net(params=params, centers=centers)


def check_nets(space: PointCloudSpace, net: Net) -> list[str]:
    problems = []
    for n, chosen in net.centers.items():
        r = net.params.scale(n)
        idx = np.asarray(chosen, dtype=int)
        block = space.dist[np.ix_(idx, idx)]
        off = ~np.eye(idx.size, dtype=bool)
        if np.any(block[off] < r):
            problems.append(f"level {n}: centers closer than {r:g}")
        covered = space.dist[:, idx].min(axis=1) < r
        covered[idx] = True
        if not covered.all():
            missing = space.ids[int(np.flatnonzero(~covered)[0])]
            problems.append(f"level {n}: point {missing} is not within {r:g} of a center")
        if r <= space.min_distance and idx.size != space.size:
            problems.append(f"level {n}: saturated level must contain every point")
    return problems


def build_filling(space: PointCloudSpace, net: Net, params: FillingParams) -> FillingGraph:
    if net.params != params:
        raise ValidationError("nets were built with different filling parameters.")
    levels, centers, radii = [], [], []
    level_vertices: dict[int, np.ndarray] = {}
    for n in params.levels:
        start = len(levels)
        for z in net.centers[n]:
            levels.append(n)
            centers.append(z)
            radii.append(params.tau * params.scale(n))
        level_vertices[n] = np.arange(start, len(levels))
    vertex_level = np.asarray(levels, dtype=int)
    vertex_center = np.asarray(centers, dtype=int)
    vertex_radius = np.asarray(radii, dtype=float)
    membership = space.dist[vertex_center] < vertex_radius[:, None]

    edges: list[tuple[int, int]] = []
    kinds: list[int] = []
    for n in params.levels:
        here = level_vertices[n]
        block = membership[here].astype(np.int32)
        overlap = block @ block.T
        for i, j in zip(*np.nonzero(np.triu(overlap, k=1)), strict=True):
            edges.append((int(here[i]), int(here[j])))
            kinds.append(HORIZONTAL)
        if n + 1 in level_vertices:
            above = level_vertices[n + 1]
            overlap = block @ membership[above].astype(np.int32).T
            for i, j in zip(*np.nonzero(overlap), strict=True):
                edges.append((int(here[i]), int(above[j])))
                kinds.append(VERTICAL)
    edge_array = np.asarray(edges, dtype=int).reshape(-1, 2)

    graph = nx.Graph()
    graph.add_nodes_from(range(len(levels)))
    graph.add_edges_from(map(tuple, edge_array))
    if not nx.is_connected(graph):
        raise ConsistencyError(
            f"filling graph is disconnected ({nx.number_connected_components(graph)} components)."
        )
    anchors = {
        n: _anchor_row(space, params, vertex_center, level_vertices[n], n) for n in params.levels
    }
    return FillingGraph(
        space=space,
        params=params,
        net=net,
        vertex_level=vertex_level,
        vertex_center=vertex_center,
        vertex_radius=vertex_radius,
        membership=membership,
        edges=edge_array,
        edge_kind=np.asarray(kinds, dtype=np.int8),
        level_vertices=level_vertices,
        anchors=anchors,
        graph=graph,
    )


def _anchor_row(
    space: PointCloudSpace,
    params: FillingParams,
    vertex_center: np.ndarray,
    here: np.ndarray,
    n: int,
) -> np.ndarray:
    """Per point z: the level-n vertex nearest z among those with d(pi(v), z) < alpha^-n."""
    block = space.dist[vertex_center[here]]
    masked = np.where(block < params.scale(n), block, np.inf)
    # argmin keeps the first minimum, i.e. the lowest id
    pick = np.argmin(masked, axis=0)
    if np.any(np.isinf(masked[pick, np.arange(space.size)])):
        raise ConsistencyError(f"level {n} net is not maximal: a point has no anchor.")
    return here[pick]


def build(space: PointCloudSpace, params: FillingParams) -> FillingGraph:
    return build_filling(space, build_nets(space, params), params)


def vertical_geodesic(graph: FillingGraph, z: int, n_from: int, n_to: int) -> list[int]:
    params = graph.params
    if not params.n_min <= n_from <= n_to <= params.n_max:
        raise ValidationError(
            f"levels must satisfy {params.n_min} <= n_from <= n_to <= {params.n_max}."
        )
    path = [int(graph.anchors[k][z]) for k in range(n_from, n_to + 1)]
    for v, w in zip(path, path[1:], strict=False):
        if not graph.graph.has_edge(v, w):
            raise ConsistencyError(f"anchored vertices {v} and {w} are not adjacent.")
    return path


def hull(graph: FillingGraph | UniformizedGraph, z: int, r: float) -> Hull:
    """Hull of B_Z(z, r): vertices at scale <= r whose ball meets B, plus edge pieces.

    On a uniformized graph, tail edges join the hull when their interior end does; the boundary
    end counts as qualifying when its point lies in B.
    """
    if r <= 0:
        raise ValidationError(f"r must be positive (got {r:g}).")
    if isinstance(graph, UniformizedGraph):
        filling, edges, n_interior = graph.filling, graph.edges, graph.n_interior
    else:
        filling, edges, n_interior = graph, graph.edges, graph.n_vertices
    space = filling.space
    in_ball = space.dist[z] < r
    scale = filling.params.alpha ** (-filling.vertex_level.astype(float))
    meets = (filling.membership & in_ball[None, :]).any(axis=1)
    qualifies = np.zeros(n_interior + space.size, dtype=bool)
    qualifies[:n_interior] = (scale <= r * (1 + 1e-12)) & meets
    qualifies[n_interior:] = in_ball
    vertices = np.flatnonzero(qualifies[:n_interior])

    a_ok = qualifies[edges[:, 0]]
    b_ok = qualifies[edges[:, 1]]
    # a is always the interior end of a tail edge
    tail = edges[:, 1] >= n_interior
    b_ok = np.where(tail & ~a_ok, False, b_ok)
    full = np.flatnonzero(a_ok & b_ok)
    half_mask = a_ok ^ b_ok
    half = np.flatnonzero(half_mask)
    return Hull(
        center=int(z),
        radius=float(r),
        vertices=vertices,
        full_edges=full,
        half_edges=half,
        half_toward_a=a_ok[half],
    )


def degree_stats(graph: FillingGraph) -> DegreeStats:
    degrees = np.array([graph.graph.degree(v) for v in range(graph.n_vertices)], dtype=int)
    per_level = {
        int(n): int(degrees[idx].max()) if idx.size else 0
        for n, idx in graph.level_vertices.items()
    }
    histogram = dict(sorted(Counter(int(d) for d in degrees).items()))
    return DegreeStats(
        max_degree=int(degrees.max()) if degrees.size else 0,
        per_level_max=per_level,
        histogram=histogram,
    )


def check_edges(graph: FillingGraph) -> list[str]:
    problems = []
    for (a, b), kind in zip(graph.edges, graph.edge_kind, strict=True):
        gap = abs(int(graph.vertex_level[a]) - int(graph.vertex_level[b]))
        if gap > 1 or (kind == HORIZONTAL) != (gap == 0) or a == b:
            problems.append(f"edge {graph.vertex_id(a)}-{graph.vertex_id(b)}: bad heights")
        if not (graph.membership[a] & graph.membership[b]).any():
            problems.append(f"edge {graph.vertex_id(a)}-{graph.vertex_id(b)}: no witness point")
    if graph.edge_kind.size and np.any(graph.edge_kind == TAIL):
        problems.append("filling graph must not contain tail edges")
    return problems


def upward_neighbor_problems(graph: FillingGraph) -> list[str]:
    problems = []
    for n, idx in graph.level_vertices.items():
        if n == graph.params.n_max:
            continue
        up = set(graph.level_vertices[n + 1].tolist())
        for v in idx:
            if not any(w in up for w in graph.graph.neighbors(int(v))):
                problems.append(f"vertex {graph.vertex_id(int(v))} has no upward neighbor")
    return problems


def large_inclusion_violations(graph: FillingGraph) -> list[str]:
    """B_Z(z, alpha^-k) lies in B(v) for every v in V_k whose alpha^-k ball meets it."""
    space, params = graph.space, graph.params
    problems = []
    for k, idx in graph.level_vertices.items():
        r = params.scale(k)
        near = space.dist[graph.vertex_center[idx]] < r
        for z in range(space.size):
            in_ball = space.dist[z] < r
            touching = idx[(near & in_ball[None, :]).any(axis=1)]
            for v in touching:
                if np.any(in_ball & ~graph.membership[v]):
                    label = graph.vertex_id(int(v))
                    problems.append(f"B({space.ids[z]}, {r:g}) not inside B({label})")
    return problems


def overlap_counts(graph: FillingGraph) -> dict[int, int]:
    """Per level, the largest number of vertex balls containing a single point."""
    return {
        int(n): int(graph.membership[idx].sum(axis=0).max())
        for n, idx in graph.level_vertices.items()
    }


def hull_overlap(graph: FillingGraph, n: int) -> int:
    """Largest number of hulls H^{B(v)}, v in V_n, sharing a vertex."""
    counts = np.zeros(graph.n_vertices, dtype=int)
    for v in graph.level_vertices[n]:
        h = hull(graph, int(graph.vertex_center[v]), float(graph.vertex_radius[v]))
        counts[h.vertices] += 1
    return int(counts.max()) if counts.size else 0
