from __future__ import annotations

import math
from collections.abc import Iterable

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path

from hyperfill.domain.models import (
    HORIZONTAL,
    TAIL,
    VERTICAL,
    FillingGraph,
    UniformizedGraph,
)
from hyperfill.domain.rules import ConsistencyError, ValidationError
from hyperfill.services.filling import hull


def horizontal_length(alpha: float, n: int) -> float:
    return alpha ** (-n)


def vertical_length(alpha: float, n: int) -> float:
    return alpha ** (-n) * (1.0 - 1.0 / alpha) / math.log(alpha)


def tail_length(alpha: float, n_max: int) -> float:
    return alpha ** (-n_max) / math.log(alpha)


def uniformize(graph: FillingGraph) -> UniformizedGraph:
    params, space = graph.params, graph.space
    alpha = params.alpha
    n_interior = graph.n_vertices

    top = graph.level_vertices[params.n_max]
    near = space.dist[graph.vertex_center[top]] < params.scale(params.n_max)
    tails = []
    for z in range(space.size):
        attached = top[near[:, z]]
        if attached.size == 0:
            raise ConsistencyError(f"boundary point {space.ids[z]} has no tail edge.")
        tails.extend((int(v), n_interior + z) for v in attached)

    edges = np.vstack([graph.edges, np.asarray(tails, dtype=int).reshape(-1, 2)])
    kinds = np.concatenate([graph.edge_kind, np.full(len(tails), TAIL, dtype=np.int8)])
    levels = np.concatenate(
        [graph.vertex_level[graph.edges[:, 0]], np.full(len(tails), params.n_max, dtype=int)]
    ).astype(int)
    scale = alpha ** (-levels.astype(float))
    rho = np.select(
        [kinds == HORIZONTAL, kinds == VERTICAL],
        [scale, scale * (1.0 - 1.0 / alpha) / math.log(alpha)],
        default=scale / math.log(alpha),
    )
    if np.any(rho <= 0):
        raise ConsistencyError("non-positive rho length.")

    n_total = n_interior + space.size
    weighted = csr_matrix((rho, (edges[:, 0], edges[:, 1])), shape=(n_total, n_total))
    distances = dijkstra(weighted, directed=False)
    if np.any(np.isinf(distances)):
        raise ConsistencyError("uniformized graph is disconnected.")
    unit = csr_matrix(
        (np.ones(len(graph.edges)), (graph.edges[:, 0], graph.edges[:, 1])),
        shape=(n_interior, n_interior),
    )
    hops = shortest_path(unit, directed=False, unweighted=True)

    nx_graph = nx.Graph()
    nx_graph.add_nodes_from(range(n_total))
    for index, ((a, b), length) in enumerate(zip(edges, rho, strict=True)):
        nx_graph.add_edge(int(a), int(b), rho_length=float(length), index=index)
    for array in (edges, kinds, levels, rho, distances, hops):
        array.setflags(write=False)
    return UniformizedGraph(
        filling=graph,
        edges=edges,
        edge_kind=kinds,
        edge_level=levels,
        rho_length=rho,
        distances=distances,
        hops=hops,
        graph=nx_graph,
    )


def d_rho(ugraph: UniformizedGraph, x: int, y: int) -> float:
    _check_vertex(ugraph, x)
    _check_vertex(ugraph, y)
    value = float(ugraph.distances[x, y])
    if not math.isfinite(value):
        raise ConsistencyError(f"vertices {x} and {y} are not connected.")
    return value


def d_rho_boundary(ugraph: UniformizedGraph, x: int) -> float:
    _check_vertex(ugraph, x)
    return float(ugraph.distances[x, ugraph.n_interior :].min())


def gromov_product_h(ugraph: UniformizedGraph, x: int, y: int) -> float:
    """Height Gromov product (x|y)_h = (h(x) + h(y) - |xy|) / 2 with unit-edge |xy|."""
    for v in (x, y):
        _check_vertex(ugraph, v)
        if ugraph.is_boundary(v):
            raise ValidationError("gromov_product_h is defined for interior vertices only.")
    h = ugraph.filling.vertex_level
    return 0.5 * (float(h[x]) + float(h[y]) - float(ugraph.hops[x, y]))


def _check_vertex(ugraph: UniformizedGraph, v: int) -> None:
    if not 0 <= v < ugraph.n_total:
        raise ValidationError(f"unknown vertex {v}.")


def filling_distance_ratios(ugraph: UniformizedGraph) -> np.ndarray:
    """d_rho(x, y) / (alpha^-(x|y)_h min{1, |xy|}) over distinct interior pairs."""
    n = ugraph.n_interior
    h = ugraph.filling.vertex_level.astype(float)
    hops = ugraph.hops
    product = 0.5 * (h[:, None] + h[None, :] - hops)
    model = ugraph.alpha ** (-product) * np.minimum(1.0, hops)
    iu = np.triu_indices(n, k=1)
    return ugraph.distances[:n, :n][iu] / model[iu]


def comparability_constant(ratios: np.ndarray) -> float:
    """Smallest C with every ratio in [1/C, C]."""
    if ratios.size == 0:
        return 1.0
    return float(max(ratios.max(), 1.0 / ratios.min(), 1.0))


def vertex_to_base_ratios(ugraph: UniformizedGraph) -> np.ndarray:
    filling = ugraph.filling
    base = ugraph.n_interior + filling.vertex_center
    to_base = ugraph.distances[np.arange(ugraph.n_interior), base]
    return to_base * ugraph.alpha ** filling.vertex_level.astype(float)


def hull_approximation_constant(
    ugraph: UniformizedGraph, balls: Iterable[tuple[int, float]]
) -> float:
    """Measured C with hull vertices inside C*r and every vertex within r/C inside the hull."""
    constant = 1.0
    n = ugraph.n_interior
    for z, r in balls:
        h = hull(ugraph, z, r)
        if h.is_empty:
            continue
        from_center = ugraph.distances[ugraph.boundary_vertex(z), :n]
        constant = max(constant, float(from_center[h.vertices].max()) / r)
        outside = np.ones(n, dtype=bool)
        outside[h.vertices] = False
        if outside.any():
            closest = float(from_center[outside].min())
            if closest > 0:
                constant = max(constant, r / closest)
    return constant
