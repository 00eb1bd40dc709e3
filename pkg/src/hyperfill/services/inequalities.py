"""Ball-wise inequality tables: each row is one (function, ball) pair with lhs, rhs and lhs/rhs."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from hyperfill.domain.kinds import CheckName
from hyperfill.domain.models import (
    BesovParams,
    BoundaryFunction,
    ExponentEstimates,
    GraphFunction,
    LiftedMeasure,
    PartitionOfUnity,
    PointCloudSpace,
    ReportRow,
    ReportTable,
    UniformizedGraph,
)
from hyperfill.domain.rules import HypothesisError, ValidationError
from hyperfill.services import filling as filling_ops
from hyperfill.services import space as space_ops
from hyperfill.services.funcspace import edge_gradients
from hyperfill.services.measure import (
    ball_gradient_mean,
    ball_mean,
    hull_edge_masses,
    hull_mass,
)
from hyperfill.services.numerics import chunked_sum, parallel_map
from hyperfill.services.traceext import poisson_extension, sample_pairs

HOLDER_PAIRS_PER_BALL = 16
HOLDER_ENLARGEMENT = 4.0
QSTAR_ENLARGEMENT = 2.0
# deviations below this share of the mean are rounding noise
NOISE = 1e-12


def ratio(lhs: float, rhs: float) -> float:
    """lhs/rhs with 0 for a vanishing lhs and inf for a vanishing rhs."""
    if lhs <= 0:
        return 0.0
    if rhs <= 0:
        return math.inf
    return lhs / rhs


def ball_label(space: PointCloudSpace, z: int, r: float) -> str:
    return f"{space.ids[z]}@{r:.12g}"


def _deviation(values: np.ndarray, mean: float) -> np.ndarray:
    gap = np.abs(values - mean)
    return np.where(gap > NOISE * max(1.0, abs(mean)), gap, 0.0)


def check_poincare_trace(
    space: PointCloudSpace,
    ugraph: UniformizedGraph,
    measure: LiftedMeasure,
    functions: Sequence[GraphFunction],
    balls: Sequence[tuple[int, float]],
    partitions: dict[int, PartitionOfUnity],
    p: float,
) -> ReportTable:
    """mean_B |Tu - (Tu)_B|^p dnu against r^p mean_{H^B} g^p dmu_beta, g the edge gradients of u."""
    hulls = []
    skipped = 0
    for z, r in balls:
        h = filling_ops.hull(ugraph, z, r)
        mass = hull_mass(measure, ugraph, h)
        if mass <= 0:
            skipped += 1
            continue
        hulls.append((z, r, hull_edge_masses(measure, ugraph, h), mass))
    top = ugraph.filling.params.n_max
    level_vertices = ugraph.filling.level_vertices[top]

    def rows_for(u: GraphFunction) -> list[ReportRow]:
        tu = partitions[top].matrix.T @ np.asarray(u.values, dtype=float)[level_vertices]
        g = edge_gradients(ugraph, u)
        rows = []
        for z, r, edge_masses, mass in hulls:
            inside = space.dist[z] < r
            w = space.weights[inside]
            vals = tu[inside]
            mean = float(w @ vals) / float(w.sum())
            lhs = float(w @ _deviation(vals, mean) ** p) / float(w.sum())
            rhs = r**p * chunked_sum(g**p * edge_masses) / mass
            rows.append(ReportRow(u.name, ball_label(space, z, r), lhs, rhs, ratio(lhs, rhs)))
        return rows

    rows = tuple(row for chunk in parallel_map(rows_for, functions) for row in chunk)
    notes = (f"{skipped} empty hulls skipped",) if skipped else ()
    return ReportTable(name=CheckName.POINCARE_TRACE.value, rows=rows, notes=notes)


def check_extension_poincare(
    space: PointCloudSpace,
    ugraph: UniformizedGraph,
    measure: LiftedMeasure,
    functions: Sequence[BoundaryFunction],
    balls: Sequence[tuple[int, float]],
    p: float,
    enlargement: float,
) -> ReportTable:
    """mean_B |f - (Pf)_Bhat|^p dnu against r^p mean_{C Bhat} g^p dmu_beta, Bhat = B_rho(z, r)."""

    def rows_for(f: BoundaryFunction) -> list[ReportRow]:
        pf = poisson_extension(space, ugraph, f).pf
        g = edge_gradients(ugraph, pf)
        values = np.asarray(f.values, dtype=float)
        rows = []
        for z, r in balls:
            center = ugraph.boundary_vertex(z)
            mean = ball_mean(measure, ugraph, center, r, pf.values)
            if math.isnan(mean):
                continue
            inside = space.dist[z] < r
            w = space.weights[inside]
            lhs = float(w @ _deviation(values[inside], mean) ** p) / float(w.sum())
            rhs = r**p * ball_gradient_mean(measure, ugraph, center, enlargement * r, g, p)
            rows.append(ReportRow(f.name, ball_label(space, z, r), lhs, rhs, ratio(lhs, rhs)))
        return rows

    rows = tuple(row for chunk in parallel_map(rows_for, functions) for row in chunk)
    return ReportTable(
        name=CheckName.EXTENSION_POINCARE.value,
        rows=rows,
        notes=(f"enlargement C = {enlargement:.6g}",),
    )


def check_holder(
    space: PointCloudSpace,
    ugraph: UniformizedGraph,
    measure: LiftedMeasure,
    functions: Sequence[BoundaryFunction],
    besov: BesovParams,
    q: float,
    balls: Sequence[tuple[int, float]],
) -> ReportTable:
    """|Pf(x) - Pf(y)| against r^(Q_b/p) d(x,y)^(1-Q_b/p) (mean_{4 Bhat} g^p dmu_beta)^(1/p)."""
    p = besov.p
    q_beta = besov.q_beta(q)
    if p <= q_beta:
        raise HypothesisError(f"holder check assumes p > Q_beta = {q_beta:.6g} (got p = {p:g}).")
    exponent = q_beta / p

    def rows_for(f: BoundaryFunction) -> list[ReportRow]:
        pf = poisson_extension(space, ugraph, f).pf
        g = edge_gradients(ugraph, pf)
        values = pf.values[ugraph.n_interior :]
        rows = []
        for z, r in balls:
            members = space_ops.ball(space, z, r)
            if members.size < 2:
                continue
            center = ugraph.boundary_vertex(z)
            energy = ball_gradient_mean(measure, ugraph, center, HOLDER_ENLARGEMENT * r, g, p)
            scale = r**exponent * max(energy, 0.0) ** (1.0 / p)
            for i, j in sample_pairs(members.size, HOLDER_PAIRS_PER_BALL, seed=0):
                x, y = int(members[i]), int(members[j])
                lhs = abs(float(values[x] - values[y]))
                rhs = scale * space.dist[x, y] ** (1.0 - exponent)
                label = f"{ball_label(space, z, r)}:{space.ids[x]}-{space.ids[y]}"
                rows.append(ReportRow(f.name, label, lhs, rhs, ratio(lhs, rhs)))
        return rows

    rows = tuple(row for chunk in parallel_map(rows_for, functions) for row in chunk)
    return ReportTable(
        name=CheckName.HOLDER.value,
        rows=rows,
        notes=(f"Q_beta = {q_beta:.6g}",),
    )


def check_sobolev_qstar(
    space: PointCloudSpace,
    ugraph: UniformizedGraph,
    measure: LiftedMeasure,
    functions: Sequence[BoundaryFunction],
    besov: BesovParams,
    exponents: ExponentEstimates | None,
    balls: Sequence[tuple[int, float]],
) -> ReportTable:
    """(mean_B |f - u_Bhat|^Q* dnu)^(1/Q*) against diam(B) (mean_{2 Bhat} g^p dmu_beta)^(1/p)."""
    if exponents is None:
        raise HypothesisError("Q* check needs volume exponent estimates for this space.")
    if exponents.eta <= 0:
        raise HypothesisError("Q* check assumes reverse doubling (fitted eta = 0).")
    q_star = besov.q_star(exponents.q)
    if q_star is None:
        raise HypothesisError(
            f"Q* check assumes p*theta < Q (got {besov.p * besov.theta:g} >= {exponents.q:.6g})."
        )
    p = besov.p

    def rows_for(f: BoundaryFunction) -> list[ReportRow]:
        pf = poisson_extension(space, ugraph, f).pf
        g = edge_gradients(ugraph, pf)
        values = np.asarray(f.values, dtype=float)
        rows = []
        for z, r in balls:
            center = ugraph.boundary_vertex(z)
            mean = ball_mean(measure, ugraph, center, r, pf.values)
            if math.isnan(mean):
                continue
            members = space_ops.ball(space, z, r)
            w = space.weights[members]
            lhs = (float(w @ _deviation(values[members], mean) ** q_star) / float(w.sum())) ** (
                1.0 / q_star
            )
            diameter = float(space.dist[np.ix_(members, members)].max())
            energy = ball_gradient_mean(measure, ugraph, center, QSTAR_ENLARGEMENT * r, g, p)
            rhs = diameter * max(energy, 0.0) ** (1.0 / p)
            rows.append(ReportRow(f.name, ball_label(space, z, r), lhs, rhs, ratio(lhs, rhs)))
        return rows

    rows = tuple(row for chunk in parallel_map(rows_for, functions) for row in chunk)
    return ReportTable(
        name=CheckName.SOBOLEV_QSTAR.value, rows=rows, notes=(f"Q* = {q_star:.6g}",)
    )


def compute_theta_q(
    space: PointCloudSpace, besov: BesovParams, q: float, ball: tuple[int, float], alpha: float
) -> float:
    """sup over s = alpha^-j <= r and z' in B of s^(1-beta/p) nu(B(z', s))^(1/q-1/p).

    Scales run down to the first one below the smallest positive distance, where every ball
    is a single point and the supremum is reached.
    """
    p = besov.p
    if q <= p:
        raise ValidationError(f"q must exceed p (got q = {q:g}, p = {p:g}).")
    z, r = ball
    if r <= 0:
        raise ValidationError(f"r must be positive (got {r:g}).")
    members = space_ops.ball(space, z, r)
    floor = space.min_distance if space.size > 1 else r
    j = math.ceil(-math.log(r) / math.log(alpha))
    while alpha ** (-j) > r:
        j += 1
    while alpha ** (-(j - 1)) <= r:
        j -= 1
    best = 0.0
    while True:
        s = alpha ** (-j)
        masses = (space.dist[members] < s).astype(float) @ space.weights
        terms = s ** (1.0 - besov.beta / p) * masses ** (1.0 / q - 1.0 / p)
        best = max(best, float(terms.max()))
        if s < floor:
            return best
        j += 1


