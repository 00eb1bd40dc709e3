from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from hyperfill.domain.kinds import CorpusKind
from hyperfill.domain.models import (
    BoundaryFunction,
    Corpus,
    CorpusFunction,
    GraphFunction,
    Net,
    PointCloudSpace,
    UniformizedGraph,
)
from hyperfill.domain.rules import require_int
from hyperfill.services.funcspace import partition_of_unity
from hyperfill.services.traceext import lipschitz_extension, poisson_extension

DEFAULT_CORPUS_SIZE = 10
ROTATION = (CorpusKind.BUMP, CorpusKind.NET_VALUED, CorpusKind.HOLDER_ROUGH)


def build_corpus(
    space: PointCloudSpace,
    net: Net,
    theta: float,
    seed: int,
    size: int = DEFAULT_CORPUS_SIZE,
) -> Corpus:
    """Constant and coordinate first, then bumps, net-valued and Holder-rough functions in turn."""
    size = require_int(size, "corpus_size", minimum=2)
    rng = np.random.default_rng(seed)
    members = [
        CorpusFunction(CorpusKind.CONSTANT, BoundaryFunction(np.ones(space.size), "constant")),
        CorpusFunction(CorpusKind.COORDINATE, _coordinate(space)),
    ]
    for k in range(size - 2):
        kind = ROTATION[k % len(ROTATION)]
        name = f"{kind.value}_{k // len(ROTATION)}"
        if kind is CorpusKind.BUMP:
            values = _bump(space, rng)
        elif kind is CorpusKind.NET_VALUED:
            values = _net_valued(space, net, rng)
        else:
            values = _holder_rough(space, net, theta, rng)
        members.append(CorpusFunction(kind, BoundaryFunction(values, name)))
    return Corpus(seed=seed, members=tuple(members))


def _coordinate(space: PointCloudSpace) -> BoundaryFunction:
    if space.coords is not None and space.coords.ndim == 2 and space.coords.shape[1] >= 1:
        return BoundaryFunction(np.array(space.coords[:, 0], dtype=float), "coordinate")
    # distance to the first point stands in for a coordinate on abstract spaces
    return BoundaryFunction(np.array(space.dist[0], dtype=float), "coordinate")


def _bump(space: PointCloudSpace, rng: np.random.Generator) -> np.ndarray:
    center = int(rng.integers(space.size))
    radius = (space.diameter or 1.0) * rng.uniform(0.15, 0.5)
    return np.clip(1.0 - space.dist[center] / radius, 0.0, 1.0)


def _net_valued(space: PointCloudSpace, net: Net, rng: np.random.Generator) -> np.ndarray:
    levels = list(net.params.levels)
    n = levels[int(rng.integers(len(levels)))]
    pou = partition_of_unity(space, net, n)
    return pou.matrix.T @ rng.uniform(-1.0, 1.0, size=pou.matrix.shape[0])


def _rough_levels(
    space: PointCloudSpace, net: Net, theta: float
) -> Iterator[tuple[float, np.ndarray]]:
    """Per level: amplitude alpha^(-theta n) and the partition rows scaled to unit RMS."""
    for n in net.params.levels:
        matrix = partition_of_unity(space, net, n).matrix
        rms = float(np.sqrt(np.sum(matrix**2 @ space.weights) / space.total_mass))
        yield net.params.alpha ** (-theta * n), matrix / rms


def _holder_rough(
    space: PointCloudSpace, net: Net, theta: float, rng: np.random.Generator
) -> np.ndarray:
    """Multiscale sum of random-sign level pieces with amplitude alpha^(-theta n)."""
    values = np.zeros(space.size)
    for amplitude, rows in _rough_levels(space, net, theta):
        signs = rng.choice((-1.0, 1.0), size=rows.shape[0])
        values += amplitude * (rows.T @ signs)
    return values


def holder_rough_covariance(space: PointCloudSpace, net: Net, theta: float) -> np.ndarray:
    """E[f(x) f(y)] over the Holder-rough family; the signs are independent and centered."""
    cov = np.zeros((space.size, space.size))
    for amplitude, rows in _rough_levels(space, net, theta):
        cov += amplitude**2 * (rows.T @ rows)
    return cov


def graph_corpus(
    space: PointCloudSpace, ugraph: UniformizedGraph, corpus: Corpus
) -> list[GraphFunction]:
    """Poisson extensions of every member, then their Lipschitz extensions."""
    extended = [poisson_extension(space, ugraph, f).pf for f in corpus.functions]
    lifted = [lipschitz_extension(space, ugraph, f) for f in corpus.functions]
    return extended + lifted
