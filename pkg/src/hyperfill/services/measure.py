from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from scipy import integrate

from hyperfill.domain.models import (
    HORIZONTAL,
    TAIL,
    Hull,
    LiftedMeasure,
    PointCloudSpace,
    ReportRow,
    ReportTable,
    UniformizedGraph,
)
from hyperfill.domain.rules import validate_beta
from hyperfill.services.fits import lower_decay_order
from hyperfill.services.numerics import capped_subset, chunked_sum, gauss_legendre_01, parallel_map

BallSample = tuple[int, float]


def lift_measure(ugraph: UniformizedGraph, space: PointCloudSpace, beta: float) -> LiftedMeasure:
    beta = validate_beta(beta)
    filling = ugraph.filling
    alpha = ugraph.alpha
    vertex_mass = filling.membership.astype(float) @ space.weights
    ends = np.concatenate([vertex_mass, space.weights])
    edge_weight = ends[ugraph.edges[:, 0]] + ends[ugraph.edges[:, 1]]
    decay = alpha ** (-beta * ugraph.edge_level.astype(float))
    log_alpha = math.log(alpha)
    factor = np.select(
        [ugraph.edge_kind == HORIZONTAL, ugraph.edge_kind == TAIL],
        [np.ones_like(decay), np.full_like(decay, 1.0 / (beta * log_alpha))],
        default=(1.0 - alpha ** (-beta)) / (beta * log_alpha),
    )
    edge_mass = edge_weight * decay * factor
    for array in (vertex_mass, edge_weight, edge_mass):
        array.setflags(write=False)
    return LiftedMeasure(
        beta=beta,
        alpha=alpha,
        vertex_mass=vertex_mass,
        edge_weight=edge_weight,
        edge_mass=edge_mass,
    )


def _base_density(measure: LiftedMeasure, ugraph: UniformizedGraph, idx: np.ndarray) -> np.ndarray:
    return measure.edge_weight[idx] * measure.alpha ** (
        -measure.beta * ugraph.edge_level[idx].astype(float)
    )


def piece_mass_t(
    measure: LiftedMeasure,
    ugraph: UniformizedGraph,
    idx: np.ndarray,
    t0: np.ndarray,
    t1: np.ndarray,
) -> np.ndarray:
    """Mass of edge pieces given in the unit parameter t (t grows toward the finer end)."""
    idx = np.asarray(idx, dtype=int)
    base = _base_density(measure, ugraph, idx)
    beta, alpha = measure.beta, measure.alpha
    flat = ugraph.edge_kind[idx] == HORIZONTAL
    with np.errstate(over="ignore"):
        curved = (alpha ** (-beta * np.asarray(t0)) - alpha ** (-beta * np.asarray(t1))) / (
            beta * math.log(alpha)
        )
    return base * np.where(flat, np.asarray(t1) - np.asarray(t0), curved)


def _w_of_s(ugraph: UniformizedGraph, idx: np.ndarray, s: np.ndarray, beta: float) -> np.ndarray:
    full = ugraph.full_tail_length[idx]
    return np.clip(1.0 - np.asarray(s) / full, 0.0, 1.0) ** beta


def piece_mass_s(
    measure: LiftedMeasure,
    ugraph: UniformizedGraph,
    idx: np.ndarray,
    s0: np.ndarray,
    s1: np.ndarray,
) -> np.ndarray:
    """Mass of edge pieces given in rho-arclength from the coarse (or interior) end."""
    idx = np.asarray(idx, dtype=int)
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    base = _base_density(measure, ugraph, idx)
    length = ugraph.rho_length[idx]
    flat = ugraph.edge_kind[idx] == HORIZONTAL
    beta = measure.beta
    curved = (_w_of_s(ugraph, idx, s0, beta) - _w_of_s(ugraph, idx, s1, beta)) / (
        beta * math.log(measure.alpha)
    )
    return base * np.where(flat, (s1 - s0) / length, curved)


def integrate_pieces(
    measure: LiftedMeasure,
    ugraph: UniformizedGraph,
    idx: np.ndarray,
    s0: np.ndarray,
    s1: np.ndarray,
    ua: np.ndarray,
    ub: np.ndarray,
    power: float | None,
) -> np.ndarray:
    """Per piece, the integral of |u|^power (or u when power is None) against mu_beta.

    u is linear in rho-arclength from ua at s = 0 to ub at s = L.  16-node Gauss-Legendre in the
    coordinate where the mass density is constant.
    """
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        return np.zeros(0)
    nodes, weights = gauss_legendre_01()
    s0 = np.asarray(s0, dtype=float)[:, None]
    s1 = np.asarray(s1, dtype=float)[:, None]
    length = ugraph.rho_length[idx][:, None]
    full = ugraph.full_tail_length[idx][:, None]
    flat = (ugraph.edge_kind[idx] == HORIZONTAL)[:, None]
    beta = measure.beta
    base = _base_density(measure, ugraph, idx)[:, None]

    w0 = np.clip(1.0 - s0 / full, 0.0, 1.0) ** beta
    w1 = np.clip(1.0 - s1 / full, 0.0, 1.0) ** beta
    w_nodes = w1 + (w0 - w1) * nodes[None, :]
    s_curved = full * (1.0 - w_nodes ** (1.0 / beta))
    s_flat = s0 + (s1 - s0) * nodes[None, :]
    s = np.where(flat, s_flat, s_curved)
    jac = np.where(flat, (s1 - s0) / length, (w0 - w1) / (beta * math.log(measure.alpha)))

    frac = np.clip(s / length, 0.0, 1.0)
    ua = np.asarray(ua, dtype=float)[:, None]
    ub = np.asarray(ub, dtype=float)[:, None]
    u = ua * (1.0 - frac) + ub * frac
    integrand = u if power is None else np.abs(u) ** power
    return (base * jac * (integrand * weights[None, :])).sum(axis=1)


def ball_pieces(
    ugraph: UniformizedGraph, center: int, r: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per edge, the two end segments of {x : d_rho(center, x) < r} in rho-arclength.

    Returns (s_lo_end, s_hi_start, full_mask, length): the piece [0, s_lo_end] near the a end and
    [s_hi_start, L] near the b end; full_mask marks edges swallowed whole.
    """
    length = ugraph.rho_length
    da = ugraph.distances[center, ugraph.edges[:, 0]]
    db = ugraph.distances[center, ugraph.edges[:, 1]]
    reach_a = np.clip(r - da, 0.0, length)
    reach_b = np.clip(r - db, 0.0, length)
    full = reach_a + reach_b >= length
    return reach_a, length - reach_b, full, length


def ball_mass(measure: LiftedMeasure, ugraph: UniformizedGraph, center: int, r: float) -> float:
    """mu_beta of the open rho-ball around any vertex, straddling edges clipped linearly."""
    if r <= 0:
        return 0.0
    return chunked_sum(ball_edge_masses(measure, ugraph, center, r))


def ball_mass_rho(
    measure: LiftedMeasure, ugraph: UniformizedGraph, center: int, r: float
) -> float:
    """mu_beta(B_rho(z, r)) for a boundary point z."""
    return ball_mass(measure, ugraph, ugraph.boundary_vertex(center), r)


def ball_edge_masses(
    measure: LiftedMeasure, ugraph: UniformizedGraph, center: int, r: float
) -> np.ndarray:
    reach_a, start_b, full, length = ball_pieces(ugraph, center, r)
    idx = np.arange(len(length))
    near_a = piece_mass_s(measure, ugraph, idx, np.zeros_like(length), reach_a)
    near_b = piece_mass_s(measure, ugraph, idx, start_b, length)
    return np.where(full, measure.edge_mass, near_a + near_b)


def ball_mean(
    measure: LiftedMeasure,
    ugraph: UniformizedGraph,
    center: int,
    r: float,
    values: np.ndarray,
) -> float:
    """mu_beta-mean over a rho-ball of a function given at vertices and linear along edges."""
    reach_a, start_b, full, length = ball_pieces(ugraph, center, r)
    idx = np.arange(len(length))
    ua = values[ugraph.edges[:, 0]]
    ub = values[ugraph.edges[:, 1]]
    zero = np.zeros_like(length)
    hi_a = np.where(full, length, reach_a)
    lo_b = np.where(full, length, start_b)
    total = integrate_pieces(measure, ugraph, idx, zero, hi_a, ua, ub, None)
    total = total + integrate_pieces(measure, ugraph, idx, lo_b, length, ua, ub, None)
    mass = ball_edge_masses(measure, ugraph, center, r)
    denominator = chunked_sum(mass)
    if denominator <= 0:
        return math.nan
    return chunked_sum(total) / denominator


def ball_gradient_mean(
    measure: LiftedMeasure,
    ugraph: UniformizedGraph,
    center: int,
    r: float,
    gradient: np.ndarray,
    p: float,
) -> float:
    """mu_beta-mean of g^p over a rho-ball for an edgewise-constant g."""
    mass = ball_edge_masses(measure, ugraph, center, r)
    denominator = chunked_sum(mass)
    if denominator <= 0:
        return math.nan
    return chunked_sum(gradient**p * mass) / denominator


def half_edge_mass(
    measure: LiftedMeasure, ugraph: UniformizedGraph, idx: np.ndarray, toward_a: np.ndarray
) -> np.ndarray:
    idx = np.asarray(idx, dtype=int)
    toward_a = np.asarray(toward_a, dtype=bool)
    t0 = np.where(toward_a, 0.0, 0.5)
    t1 = np.where(toward_a, 0.5, np.where(ugraph.edge_kind[idx] == TAIL, np.inf, 1.0))
    return piece_mass_t(measure, ugraph, idx, t0, t1)


def hull_edge_masses(
    measure: LiftedMeasure, ugraph: UniformizedGraph, hull: Hull
) -> np.ndarray:
    """Per edge, the mass of its part inside the hull."""
    out = np.zeros(len(ugraph.edges))
    out[hull.full_edges] = measure.edge_mass[hull.full_edges]
    out[hull.half_edges] = half_edge_mass(measure, ugraph, hull.half_edges, hull.half_toward_a)
    return out


def hull_mass(measure: LiftedMeasure, ugraph: UniformizedGraph, hull: Hull) -> float:
    if hull.full_edges.size == 0 and hull.half_edges.size == 0:
        return 0.0
    return chunked_sum(hull_edge_masses(measure, ugraph, hull))


def level_mass(measure: LiftedMeasure, ugraph: UniformizedGraph, n: int) -> float:
    levels = np.concatenate(
        [ugraph.filling.vertex_level, np.full(ugraph.filling.space.size, np.iinfo(int).max)]
    )
    touches = (levels[ugraph.edges[:, 0]] == n) | (levels[ugraph.edges[:, 1]] == n)
    return chunked_sum(measure.edge_mass[touches])


def vertex_mass_ratio(measure: LiftedMeasure, ugraph: UniformizedGraph) -> float:
    """Largest mu_hat(v)/mu_hat(w) over interior edges."""
    edges = ugraph.filling.edges
    if edges.size == 0:
        return 1.0
    a = measure.vertex_mass[edges[:, 0]]
    b = measure.vertex_mass[edges[:, 1]]
    return float(np.max(np.maximum(a / b, b / a)))


def default_radii(ugraph: UniformizedGraph, decades: float = 2.0) -> list[float]:
    params = ugraph.filling.params
    first = params.n_min + 1
    steps = math.ceil(decades * math.log(10.0) / math.log(params.alpha))
    last = max(params.n_max - 1, first + steps)
    return [params.scale(k) for k in range(first, last + 1)]


def default_samples(
    ugraph: UniformizedGraph, max_centers: int = 16, decades: float = 2.0
) -> list[BallSample]:
    """Capped boundary and interior centers crossed with a geometric radius grid."""
    boundary = capped_subset(range(ugraph.n_interior, ugraph.n_total), max_centers)
    interior = capped_subset(range(ugraph.n_interior), max_centers)
    radii = default_radii(ugraph, decades)
    return [(c, r) for c in boundary + interior for r in radii]


def doubling_sweep(
    measure: LiftedMeasure, ugraph: UniformizedGraph, samples: Sequence[BallSample]
) -> ReportTable:
    def row(sample: BallSample) -> ReportRow | None:
        center, r = sample
        small = ball_mass(measure, ugraph, center, r)
        if small <= 0:
            return None
        big = ball_mass(measure, ugraph, center, 2.0 * r)
        return ReportRow(ugraph.vertex_id(center), f"{r:.12g}", big, small, big / small)

    rows = parallel_map(row, samples)
    kept = tuple(r for r in rows if r is not None)
    notes = () if len(kept) == len(rows) else (f"{len(rows) - len(kept)} empty balls skipped",)
    return ReportTable(name="doubling", rows=kept, notes=notes)


def lower_decay_fit(
    measure: LiftedMeasure, ugraph: UniformizedGraph, samples: Sequence[BallSample]
) -> tuple[float, float]:
    """Fitted (Q', C) with mu(B(x, r'))/mu(B(x, r)) >= C^-1 (r'/r)^Q' on all sampled pairs."""
    by_center: dict[int, list[float]] = {}
    for center, r in samples:
        by_center.setdefault(center, []).append(r)

    def pairs(center: int) -> tuple[list[float], list[float]]:
        radii = sorted(set(by_center[center]))
        masses = [ball_mass(measure, ugraph, center, r) for r in radii]
        xs, ys = [], []
        for k, (r, m) in enumerate(zip(radii, masses, strict=True)):
            for r_small, m_small in zip(radii[:k], masses[:k], strict=True):
                if m_small > 0 and m > 0:
                    xs.append(math.log(r_small / r))
                    ys.append(math.log(m_small / m))
        return xs, ys

    collected = parallel_map(pairs, sorted(by_center))
    x = np.array([v for xs, _ in collected for v in xs])
    y = np.array([v for _, ys in collected for v in ys])
    if x.size == 0:
        return 0.0, 1.0
    # the constant absorbs the coarse-scale offset, so the intercept is free
    return lower_decay_order(x, y, anchored=False)


def quadrature_mass(measure: LiftedMeasure, ugraph: UniformizedGraph, e: int) -> float:
    """Adaptive quadrature of alpha^(-beta h(t)) (mu_hat v + mu_hat w) along an edge."""
    alpha, beta = measure.alpha, measure.beta
    n = float(ugraph.edge_level[e])
    weight = float(measure.edge_weight[e])
    kind = ugraph.edge_kind[e]
    if kind == HORIZONTAL:
        return alpha ** (-beta * n) * weight
    upper = np.inf if kind == TAIL else 1.0
    value, _ = integrate.quad(
        lambda t: alpha ** (-beta * (n + t)) * weight, 0.0, upper, epsabs=0, epsrel=1e-13
    )
    return value


def quadrature_length(ugraph: UniformizedGraph, e: int) -> float:
    alpha = ugraph.alpha
    n = float(ugraph.edge_level[e])
    kind = ugraph.edge_kind[e]
    if kind == HORIZONTAL:
        return alpha ** (-n)
    upper = np.inf if kind == TAIL else 1.0
    value, _ = integrate.quad(lambda t: alpha ** (-(n + t)), 0.0, upper, epsabs=0, epsrel=1e-13)
    return value
