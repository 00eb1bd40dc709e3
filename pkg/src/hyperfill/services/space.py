from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np

from hyperfill.domain.kinds import SpaceKind
from hyperfill.domain.models import ExponentEstimates, PointCloudSpace
from hyperfill.domain.rules import (
    MetricAxiomError,
    ValidationError,
    require_int,
    validate_enum,
    validate_snowflake,
)
from hyperfill.services.fits import lower_decay_order, upper_growth_order

EXHAUSTIVE_LIMIT = 512
SAMPLED_TRIPLES = 1_000_000
RELATIVE_TOL = 1e-12


def make_space(
    ids: Sequence[str],
    dist: np.ndarray,
    weights: Sequence[float] | np.ndarray,
    coords: np.ndarray | None = None,
) -> PointCloudSpace:
    ids = tuple(str(point_id) for point_id in ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("point ids must be unique.")
    dist = np.array(dist, dtype=float)
    weights = np.array(weights, dtype=float)
    if dist.shape != (len(ids), len(ids)):
        raise ValidationError(
            f"dist must be a {len(ids)}x{len(ids)} matrix (got shape {dist.shape})."
        )
    if weights.shape != (len(ids),):
        raise ValidationError(f"weights must have {len(ids)} entries.")
    _check_weights(ids, weights)
    _check_metric(ids, dist)
    dist.setflags(write=False)
    weights.setflags(write=False)
    if coords is not None:
        coords = np.array(coords, dtype=float)
        coords.setflags(write=False)
    return PointCloudSpace(ids=ids, dist=dist, weights=weights, coords=coords)


def euclidean_space(
    ids: Sequence[str], coords: np.ndarray, weights: Sequence[float] | np.ndarray
) -> PointCloudSpace:
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] != len(ids):
        coords = coords.T
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    return make_space(ids, dist, weights, coords=coords)


def _check_weights(ids: tuple[str, ...], weights: np.ndarray) -> None:
    for point_id, weight in zip(ids, weights, strict=True):
        if not math.isfinite(weight) or weight <= 0:
            raise ValidationError(f"weight of point {point_id} must be positive (got {weight:g}).")


def _check_metric(ids: tuple[str, ...], dist: np.ndarray) -> None:
    n = len(ids)
    if not np.all(np.isfinite(dist)):
        raise MetricAxiomError("dist must contain only finite values.")
    scale = float(dist.max()) if n else 0.0
    tol = RELATIVE_TOL * max(scale, 1.0)
    if np.any(np.abs(np.diag(dist)) > 0):
        i = int(np.flatnonzero(np.diag(dist))[0])
        raise MetricAxiomError(f"dist({ids[i]},{ids[i]}) must be 0.")
    asym = np.argwhere(np.abs(dist - dist.T) > tol)
    if asym.size:
        i, j = (int(k) for k in asym[0])
        raise MetricAxiomError(
            f"dist must be symmetric: d({ids[i]},{ids[j]}) != d({ids[j]},{ids[i]})."
        )
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] <= 0):
        i, j = (int(k) for k in np.argwhere((dist <= 0) & off)[0])
        raise MetricAxiomError(f"dist({ids[i]},{ids[j]}) must be positive for distinct points.")
    if n <= EXHAUSTIVE_LIMIT:
        for k in range(n):
            bad = dist > dist[:, k : k + 1] + dist[k : k + 1, :] + tol
            if bad.any():
                i, j = (int(v) for v in np.argwhere(bad)[0])
                _raise_triangle(ids, dist, i, k, j)
        return
    rng = np.random.default_rng(0)
    remaining = SAMPLED_TRIPLES
    while remaining > 0:
        batch = min(remaining, 100_000)
        i, k, j = rng.integers(0, n, size=(3, batch))
        bad = dist[i, j] > dist[i, k] + dist[k, j] + tol
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            _raise_triangle(ids, dist, int(i[first]), int(k[first]), int(j[first]))
        remaining -= batch


def _raise_triangle(ids: tuple[str, ...], dist: np.ndarray, i: int, k: int, j: int) -> None:
    triple = tuple(ids[m] for m in sorted((i, k, j)))
    raise MetricAxiomError(
        f"triangle inequality fails for triple ({', '.join(triple)}): "
        f"d({ids[i]},{ids[j]})={dist[i, j]:g} > "
        f"d({ids[i]},{ids[k]})+d({ids[k]},{ids[j]})={dist[i, k] + dist[k, j]:g}",
        triple=triple,  # type: ignore[arg-type]
    )


def generate_space(kind: SpaceKind | str, params: Mapping[str, Any]) -> PointCloudSpace:
    kind = _space_kind(kind)
    if kind is SpaceKind.INTERVAL_GRID:
        return interval_grid(require_int(params.get("n", 64), "n", minimum=2))
    if kind is SpaceKind.CIRCLE:
        return circle(require_int(params.get("n", 64), "n", minimum=3))
    if kind is SpaceKind.CANTOR:
        return cantor(require_int(params.get("level", 5), "level", minimum=1))
    eps = validate_snowflake(params.get("eps", 0.5))
    base_kind = _space_kind(params.get("base", SpaceKind.INTERVAL_GRID.value))
    if base_kind is SpaceKind.SNOWFLAKE:
        raise ValidationError("snowflake base must be a non-snowflake generator.")
    return snowflake(generate_space(base_kind, params), eps)


def _space_kind(kind: SpaceKind | str) -> SpaceKind:
    if isinstance(kind, SpaceKind):
        return kind
    normalized = str(kind).replace("-", "_")
    validate_enum(normalized, [k.value for k in SpaceKind], "kind")
    return SpaceKind(normalized)


def interval_grid(n: int) -> PointCloudSpace:
    coords = np.arange(n, dtype=float) / (n - 1)
    return euclidean_space([str(k) for k in range(n)], coords[:, None], np.full(n, 1.0 / n))


def circle(n: int) -> PointCloudSpace:
    angle = 2.0 * math.pi * np.arange(n) / n
    radius = 1.0 / (2.0 * math.pi)
    coords = radius * np.column_stack([np.cos(angle), np.sin(angle)])
    return euclidean_space([str(k) for k in range(n)], coords, np.full(n, 1.0 / n))


def cantor(level: int) -> PointCloudSpace:
    """Endpoints of the 2^level intervals of the level-th middle-thirds construction."""
    intervals = [(0, 3**level)]
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            third = (b - a) // 3
            nxt.extend([(a, a + third), (b - third, b)])
        intervals = nxt
    numerators = sorted({end for interval in intervals for end in interval})
    coords = np.array(numerators, dtype=float) / 3**level
    n = len(numerators)
    return euclidean_space([str(k) for k in range(n)], coords[:, None], np.full(n, 1.0 / n))


def snowflake(space: PointCloudSpace, eps: float) -> PointCloudSpace:
    eps = validate_snowflake(eps)
    return make_space(space.ids, space.dist**eps, space.weights)


def refine_params(kind: SpaceKind | str, params: Mapping[str, Any]) -> dict[str, Any]:
    """Generator parameters for the next finer space of the same family."""
    kind = _space_kind(kind)
    refined = dict(params)
    if kind is SpaceKind.CANTOR:
        refined["level"] = int(params.get("level", 5)) + 1
        return refined
    if kind is SpaceKind.SNOWFLAKE:
        base = _space_kind(params.get("base", SpaceKind.INTERVAL_GRID.value))
        refined.update(refine_params(base, params))
        return refined
    n = int(params.get("n", 64))
    # the coarse interval grid stays a subset of the refined one
    refined["n"] = 2 * n - 1 if kind is SpaceKind.INTERVAL_GRID else 2 * n
    return refined


def ball(space: PointCloudSpace, z: int, r: float, closed: bool = False) -> np.ndarray:
    _check_point(space, z)
    row = space.dist[z]
    mask = row <= r if closed else row < r
    mask[z] = True
    return np.flatnonzero(mask)


def measure(space: PointCloudSpace, subset: Iterable[int]) -> float:
    points = list(subset)
    for z in points:
        _check_point(space, z)
    if not points:
        return 0.0
    return float(space.weights[np.asarray(points, dtype=int)].sum())


def ball_mass(space: PointCloudSpace, z: int, r: float) -> float:
    return float(space.weights[space.dist[z] < r].sum() if r > 0 else space.weights[z])


def _check_point(space: PointCloudSpace, z: int) -> None:
    if isinstance(z, bool) or not isinstance(z, int | np.integer) or not 0 <= z < space.size:
        raise ValidationError(f"unknown point {z!r}.")


def estimate_exponents(space: PointCloudSpace, scale_grid: Sequence[float]) -> ExponentEstimates:
    if space.size < 2:
        raise ValidationError("degenerate: a single-point space has no scales to sample.")
    lo = space.min_distance * (1 - 1e-9)
    hi = space.diameter * (1 + 1e-9)
    radii = np.array(sorted({float(r) for r in scale_grid if lo <= r <= hi}), dtype=float)
    if radii.size < 2 or radii[-1] / radii[0] < 10.0:
        raise ValidationError(
            "degenerate scale grid: need radii spanning at least one decade "
            "within [min positive distance, diameter]."
        )
    masses = _ball_masses(space, radii)
    doubled = _ball_masses(space, 2.0 * radii)
    c_nu = float(np.max(doubled / masses))

    xs, ys = [], []
    for k in range(radii.size):
        for k_small in range(k):
            xs.append(np.full(space.size, math.log(radii[k_small] / radii[k])))
            ys.append(np.log(masses[:, k_small] / masses[:, k]))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    q, c_low = lower_decay_order(x, y)
    eta, c_rev = upper_growth_order(x, y)
    return ExponentEstimates(c_nu=max(c_nu, 1.0), q=q, c_low=c_low, eta=eta, c_rev=c_rev)


def _ball_masses(space: PointCloudSpace, radii: np.ndarray) -> np.ndarray:
    inside = space.dist[:, :, None] < radii[None, None, :]
    return np.einsum("zyk,y->zk", inside, space.weights)


def default_scale_grid(space: PointCloudSpace, alpha: float = 2.0) -> list[float]:
    if space.size < 2:
        return []
    radii = []
    r = space.diameter
    while r > space.min_distance:
        radii.append(r)
        r /= alpha
    radii.append(space.min_distance)
    return radii
