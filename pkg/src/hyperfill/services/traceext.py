from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from itertools import combinations, islice

import networkx as nx
import numpy as np

from hyperfill.domain.models import (
    HORIZONTAL,
    BoundaryFunction,
    ExtensionResult,
    FillingGraph,
    GraphFunction,
    LiftedMeasure,
    PartitionOfUnity,
    PointCloudSpace,
    TraceResult,
    UniformizedGraph,
)
from hyperfill.domain.rules import ValidationError
from hyperfill.services.funcspace import (
    edge_power_integrals,
    lp_norm_boundary,
    partition_of_unity,
)
from hyperfill.services.numerics import chunked_sum

UPPER_GRADIENT_RTOL = 1e-9
UPPER_GRADIENT_ATOL = 1e-12


@dataclass(frozen=True)
class PairViolation:
    x: str
    y: str
    lhs: float
    rhs: float
    detail: str


def build_partitions(graph: FillingGraph) -> dict[int, PartitionOfUnity]:
    return {n: partition_of_unity(graph.space, graph.net, n) for n in graph.params.levels}


def trace(
    ugraph: UniformizedGraph,
    partitions: dict[int, PartitionOfUnity],
    u: GraphFunction,
    levels: Iterable[int] | None = None,
    p: float = 2.0,
) -> TraceResult:
    filling = ugraph.filling
    space = filling.space
    values = np.asarray(u.values, dtype=float)
    if values.shape != (ugraph.n_total,):
        raise ValidationError(f"graph function must have {ugraph.n_total} values.")
    n_max = filling.params.n_max
    levels = tuple(sorted(set(filling.params.levels if levels is None else levels)))
    for n in levels:
        if n not in filling.level_vertices:
            raise ValidationError(f"level {n} is outside [{filling.params.n_min}, {n_max}].")

    def at_level(n: int) -> np.ndarray:
        return partitions[n].matrix.T @ values[filling.level_vertices[n]]

    partial = {n: at_level(n) for n in levels}
    final = partial[n_max] if n_max in partial else at_level(n_max)

    def lp(diff: np.ndarray) -> float:
        return lp_norm_boundary(space, BoundaryFunction(diff), p)

    steps = tuple(
        lp(partial[b] - partial[a]) for a, b in zip(levels, levels[1:], strict=False) if b == a + 1
    )
    tail = tuple(lp(final - partial[n]) for n in levels)
    return TraceResult(
        levels=levels, partial=partial, trace=final, step_decay=steps, tail_decay=tail
    )


def ensemble_tail(
    ugraph: UniformizedGraph,
    partitions: dict[int, PartitionOfUnity],
    covariance: np.ndarray,
    levels: Iterable[int],
    p: float = 2.0,
) -> tuple[float, ...]:
    """||RMS of Tr Pf - T_n Pf||_{L^p} per level over a family with the given covariance."""
    filling = ugraph.filling
    space = filling.space
    op = poisson_operator(space, ugraph)

    def at_level(n: int) -> np.ndarray:
        return partitions[n].matrix.T @ op[filling.level_vertices[n]]

    final = at_level(filling.params.n_max)
    out = []
    for n in levels:
        diff = final - at_level(n)
        variance = np.clip(np.sum((diff @ covariance) * diff, axis=1), 0.0, None)
        out.append(lp_norm_boundary(space, BoundaryFunction(np.sqrt(variance)), p))
    return tuple(out)


def poisson_operator(space: PointCloudSpace, ugraph: UniformizedGraph) -> np.ndarray:
    """Row v holds the nu-weights averaging f over the ball of vertex v."""
    member = ugraph.filling.membership.astype(float)
    return member * space.weights / (member @ space.weights)[:, None]


def poisson_extension(
    space: PointCloudSpace, ugraph: UniformizedGraph, f: BoundaryFunction
) -> ExtensionResult:
    filling = ugraph.filling
    values = np.asarray(f.values, dtype=float)
    if values.shape != (space.size,):
        raise ValidationError(f"boundary function must have {space.size} values.")
    interior = poisson_operator(space, ugraph) @ values
    pf = np.concatenate([interior, values])
    levels = np.concatenate([filling.vertex_level, np.full(space.size, np.iinfo(int).max)])
    params = filling.params
    cutoff = {n: (levels >= n + 1).astype(float) for n in range(params.n_min - 1, params.n_max + 1)}
    return ExtensionResult(f=f, pf=GraphFunction(pf, name=f"P{f.name}"), cutoff=cutoff)


def truncate_extension(ext: ExtensionResult, n: int) -> GraphFunction:
    """P_n f = xi_n Pf: zero on levels <= n, Pf above, f on the boundary."""
    lo, hi = min(ext.cutoff), max(ext.cutoff)
    xi = ext.cutoff[min(max(n, lo), hi)]
    return GraphFunction(ext.pf.values * xi, name=f"P{n}{ext.f.name}")


def lipschitz_extension(
    space: PointCloudSpace, ugraph: UniformizedGraph, f: BoundaryFunction
) -> GraphFunction:
    values = np.asarray(f.values, dtype=float)
    if values.shape != (space.size,):
        raise ValidationError(f"boundary function must have {space.size} values.")
    interior = values[ugraph.filling.vertex_center]
    return GraphFunction(np.concatenate([interior, values]), name=f"L{f.name}")


def restricted_lp_norm(
    ugraph: UniformizedGraph, measure: LiftedMeasure, u: GraphFunction, n: int, p: float
) -> float:
    """||u||_{L^p(X_{>=n})}: edges whose coarse end sits at level n or finer."""
    keep = ugraph.edge_level >= n
    integrals = edge_power_integrals(ugraph, measure, np.asarray(u.values, dtype=float), p)
    return chunked_sum(integrals[keep]) ** (1.0 / p)


def hajlasz_gradients(
    ugraph: UniformizedGraph,
    g: np.ndarray,
    theta: float,
    k_range: Iterable[int] | None = None,
) -> dict[int, BoundaryFunction]:
    """g_k(z) = alpha^(theta(k+1)) times the g-integral over the anchored ray from v_{k,z}
    plus the g-integral over the horizontal edges at v_{k,z}.
    """
    filling = ugraph.filling
    params = filling.params
    g = np.asarray(g, dtype=float)
    if g.shape != (len(ugraph.edges),):
        raise ValidationError(f"edge function must have {len(ugraph.edges)} values.")
    if np.any(g < 0):
        raise ValidationError("edge function must be nonnegative.")
    k_range = list(params.levels if k_range is None else k_range)
    for k in k_range:
        if k not in filling.anchors:
            raise ValidationError(f"level {k} is outside the filling's level range.")

    edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(ugraph.edges)}
    weighted = g * ugraph.rho_length
    horizontal = np.zeros(ugraph.n_total)
    flat = ugraph.edge_kind == HORIZONTAL
    np.add.at(horizontal, ugraph.edges[flat, 0], weighted[flat])
    np.add.at(horizontal, ugraph.edges[flat, 1], weighted[flat])

    points = np.arange(filling.space.size)
    top = filling.anchors[params.n_max]
    tails = [
        edge_index[(int(v), ugraph.n_interior + int(z))] for z, v in zip(points, top, strict=True)
    ]
    ray = {params.n_max: weighted[tails]}
    for k in range(params.n_max - 1, min(k_range, default=params.n_max) - 1, -1):
        lower, upper = filling.anchors[k], filling.anchors[k + 1]
        step = weighted[[edge_index[(int(a), int(b))] for a, b in zip(lower, upper, strict=True)]]
        ray[k] = step + ray[k + 1]

    alpha = params.alpha
    return {
        k: BoundaryFunction(
            alpha ** (theta * (k + 1)) * (ray[k] + horizontal[filling.anchors[k]]), name=f"g{k}"
        )
        for k in k_range
    }


def hajlasz_violations(
    space: PointCloudSpace,
    f: BoundaryFunction,
    gradients: dict[int, BoundaryFunction],
    theta: float,
    alpha: float,
) -> tuple[list[PairViolation], int]:
    """Pairs at distance in [alpha^(-k-1), alpha^-k) with |f(x)-f(y)| > d^theta (g_k(x) + g_k(y)).

    Returns the violations and the number of pairs tested.
    """
    values = np.asarray(f.values, dtype=float)
    violations: list[PairViolation] = []
    tested = 0
    for k, gk in gradients.items():
        lo, hi = alpha ** (-k - 1), alpha ** (-k)
        annulus = np.triu((space.dist >= lo) & (space.dist < hi), k=1)
        xs, ys = np.nonzero(annulus)
        tested += xs.size
        lhs = np.abs(values[xs] - values[ys])
        rhs = space.dist[xs, ys] ** theta * (gk.values[xs] + gk.values[ys])
        bad = lhs > rhs * (1 + UPPER_GRADIENT_RTOL) + UPPER_GRADIENT_ATOL
        for i in np.flatnonzero(bad):
            violations.append(
                PairViolation(
                    space.ids[xs[i]], space.ids[ys[i]], float(lhs[i]), float(rhs[i]), f"k={k}"
                )
            )
    return violations, tested


def hajlasz_energy(
    space: PointCloudSpace, gradients: dict[int, BoundaryFunction], p: float
) -> float:
    return sum(lp_norm_boundary(space, gk, p) ** p for gk in gradients.values())


def sample_pairs(n_points: int, max_pairs: int, seed: int) -> list[tuple[int, int]]:
    pairs = list(combinations(range(n_points), 2))
    if len(pairs) <= max_pairs:
        return pairs
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
    return [pairs[i] for i in picks]


def check_hyperbolic_upper_gradient(
    space: PointCloudSpace,
    ugraph: UniformizedGraph,
    f: BoundaryFunction,
    g: np.ndarray,
    path_budget: int = 2,
    max_pairs: int = 64,
    seed: int = 0,
) -> list[PairViolation]:
    """Necessary-condition test of |f(x) - f(y)| <= int_gamma g ds_rho on finitely many paths.

    Each sampled boundary pair is tested along its d_rho-shortest path and up to path_budget
    next-shortest simple paths; an empty result means no violation was found, not a proof.
    """
    if path_budget < 1:
        raise ValidationError("path_budget must be >= 1.")
    values = np.asarray(f.values, dtype=float)
    weighted = np.asarray(g, dtype=float) * ugraph.rho_length
    violations = []
    for x, y in sample_pairs(space.size, max_pairs, seed):
        lhs = abs(values[x] - values[y])
        bx, by = ugraph.boundary_vertex(x), ugraph.boundary_vertex(y)
        paths = nx.shortest_simple_paths(ugraph.graph, bx, by, weight="rho_length")
        for rank, path in enumerate(islice(paths, 1 + path_budget)):
            idx = [ugraph.graph[a][b]["index"] for a, b in zip(path, path[1:], strict=False)]
            rhs = float(weighted[idx].sum())
            if lhs > rhs * (1 + UPPER_GRADIENT_RTOL) + UPPER_GRADIENT_ATOL:
                violations.append(
                    PairViolation(space.ids[x], space.ids[y], lhs, rhs, f"path {rank}")
                )
                break
    return violations
