from __future__ import annotations

import math

import numpy as np

from hyperfill.domain.models import (
    BoundaryFunction,
    GraphFunction,
    LiftedMeasure,
    Net,
    PartitionOfUnity,
    PointCloudSpace,
    UniformizedGraph,
)
from hyperfill.domain.rules import ValidationError, validate_besov
from hyperfill.services.measure import integrate_pieces
from hyperfill.services.numerics import chunked_sum

COARSE_CUTOFF = 1e-12
MAX_COARSE_LEVELS = 10_000


def _values(f: BoundaryFunction | GraphFunction, size: int, what: str) -> np.ndarray:
    values = np.asarray(f.values, dtype=float)
    if values.shape != (size,):
        raise ValidationError(f"{what} must have {size} values (got {values.shape[0]}).")
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{what} values must be finite.")
    return values


def besov_norm(space: PointCloudSpace, f: BoundaryFunction, p: float, theta: float) -> float:
    validate_besov(p, theta)
    values = _values(f, space.size, "boundary function")
    if space.size < 2:
        return 0.0
    off = ~np.eye(space.size, dtype=bool)
    diff = np.abs(values[:, None] - values[None, :]) ** p
    dist = np.where(off, space.dist, 1.0)
    pair_mass = np.outer(space.weights, space.weights) / np.where(off, space.pair_ball_mass, 1.0)
    terms = np.where(off, diff / dist ** (p * theta) * pair_mass, 0.0)
    return chunked_sum(terms) ** (1.0 / p)


def besov_norm_dyadic(
    space: PointCloudSpace, f: BoundaryFunction, p: float, theta: float, alpha: float
) -> float:
    validate_besov(p, theta)
    if alpha <= 1:
        raise ValidationError(f"alpha must be > 1 (got {alpha:g}).")
    values = _values(f, space.size, "boundary function")
    if space.size < 2:
        return 0.0
    diff = np.abs(values[:, None] - values[None, :]) ** p
    weights = space.weights
    # finest level whose balls reach past the nearest neighbour
    n = math.floor(-math.log(space.min_distance) / math.log(alpha))
    while alpha ** (-n) <= space.min_distance:
        n -= 1
    total = 0.0
    for _ in range(MAX_COARSE_LEVELS):
        r = alpha ** (-n)
        inside = (space.dist < r).astype(float)
        averages = (inside * diff) @ weights / (inside @ weights)
        term = chunked_sum(weights * averages) * alpha ** (n * theta * p)
        total += term
        if r > space.diameter and (total == 0.0 or term <= COARSE_CUTOFF * total):
            break
        n -= 1
    return total ** (1.0 / p)


def lp_norm_boundary(space: PointCloudSpace, f: BoundaryFunction, p: float) -> float:
    values = _values(f, space.size, "boundary function")
    return chunked_sum(np.abs(values) ** p * space.weights) ** (1.0 / p)


def check_besov_norm(space: PointCloudSpace, f: BoundaryFunction, p: float, theta: float) -> float:
    return lp_norm_boundary(space, f, p) + besov_norm(space, f, p, theta)


def edge_gradients(ugraph: UniformizedGraph, u: GraphFunction) -> np.ndarray:
    values = _values(u, ugraph.n_total, "graph function")
    return np.abs(values[ugraph.edges[:, 0]] - values[ugraph.edges[:, 1]]) / ugraph.rho_length


def edge_gradient(ugraph: UniformizedGraph, u: GraphFunction, edge: int) -> float:
    if not 0 <= edge < len(ugraph.edges):
        raise ValidationError(f"unknown edge {edge}.")
    a, b = ugraph.edges[edge]
    values = _values(u, ugraph.n_total, "graph function")
    return float(abs(values[a] - values[b]) / ugraph.rho_length[edge])


def dirichlet_norm(
    ugraph: UniformizedGraph, measure: LiftedMeasure, u: GraphFunction, p: float
) -> float:
    gradient = edge_gradients(ugraph, u)
    return chunked_sum(gradient**p * measure.edge_mass) ** (1.0 / p)


def lp_norm_graph(
    ugraph: UniformizedGraph, measure: LiftedMeasure, u: GraphFunction, p: float
) -> float:
    values = _values(u, ugraph.n_total, "graph function")
    return chunked_sum(edge_power_integrals(ugraph, measure, values, p)) ** (1.0 / p)


def edge_power_integrals(
    ugraph: UniformizedGraph, measure: LiftedMeasure, values: np.ndarray, p: float
) -> np.ndarray:
    idx = np.arange(len(ugraph.edges))
    return integrate_pieces(
        measure,
        ugraph,
        idx,
        np.zeros(idx.size),
        ugraph.rho_length,
        values[ugraph.edges[:, 0]],
        values[ugraph.edges[:, 1]],
        p,
    )


def newtonian_norm(
    ugraph: UniformizedGraph, measure: LiftedMeasure, u: GraphFunction, p: float
) -> float:
    return lp_norm_graph(ugraph, measure, u, p) + dirichlet_norm(ugraph, measure, u, p)


def partition_of_unity(space: PointCloudSpace, net: Net, n: int) -> PartitionOfUnity:
    if n not in net.centers:
        raise ValidationError(f"level {n} is outside the net's level range.")
    r = net.params.scale(n)
    centers = np.asarray(net.centers[n], dtype=int)
    tents = np.clip(2.0 - space.dist[centers] / r, 0.0, 1.0)
    total = tents.sum(axis=0)
    if np.any(total < 1.0 - 1e-12):
        raise ValidationError(f"level {n} centers do not cover every point.")
    matrix = tents / total[None, :]
    return PartitionOfUnity(
        level=n,
        vertices=centers,
        matrix=matrix,
        lipschitz_constant=_lipschitz_scaled(space, matrix, r),
    )


def _lipschitz_scaled(space: PointCloudSpace, matrix: np.ndarray, r: float) -> float:
    """max over rows and point pairs of |psi(x) - psi(y)| / d(x, y), times r."""
    if space.size < 2:
        return 0.0
    off = ~np.eye(space.size, dtype=bool)
    dist = np.where(off, space.dist, np.inf)
    best = 0.0
    for row in matrix:
        best = max(best, float(np.max(np.abs(row[:, None] - row[None, :]) / dist)))
    return best * r


def lipschitz_constant(space: PointCloudSpace, f: BoundaryFunction) -> float:
    values = _values(f, space.size, "boundary function")
    if space.size < 2:
        return 0.0
    off = ~np.eye(space.size, dtype=bool)
    quotient = np.abs(values[:, None] - values[None, :]) / np.where(off, space.dist, np.inf)
    return float(quotient.max())


def truncate(f: BoundaryFunction, lo: float = 0.0, hi: float = 1.0) -> BoundaryFunction:
    return BoundaryFunction(np.clip(f.values, lo, hi), name=f"{f.name}[{lo:g},{hi:g}]")
