from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Any

import networkx as nx
import numpy as np

from hyperfill.config import RunConfig
from hyperfill.domain.kinds import CheckName, CheckStatus
from hyperfill.domain.models import (
    EDGE_KINDS_BY_CODE,
    BesovParams,
    BoundaryFunction,
    CheckResult,
    Corpus,
    ExponentEstimates,
    ExtensionResult,
    FillingGraph,
    FillingParams,
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
from hyperfill.services.corpus import build_corpus, graph_corpus, holder_rough_covariance
from hyperfill.services.events import EventLogger
from hyperfill.services.exports import write_bundle
from hyperfill.services.fits import slope_fit
from hyperfill.services.funcspace import (
    besov_norm,
    besov_norm_dyadic,
    check_besov_norm,
    dirichlet_norm,
    edge_gradients,
    lp_norm_boundary,
    lp_norm_graph,
    newtonian_norm,
    truncate,
)
from hyperfill.services.inequalities import (
    check_extension_poincare,
    check_holder,
    check_poincare_trace,
    check_sobolev_qstar,
    compute_theta_q,
    ratio,
)
from hyperfill.services.measure import (
    ball_mass,
    ball_mass_rho,
    default_samples,
    doubling_sweep,
    hull_mass,
    level_mass,
    lift_measure,
    lower_decay_fit,
    quadrature_length,
    quadrature_mass,
    vertex_mass_ratio,
)
from hyperfill.services.numerics import capped_subset, parallel_map
from hyperfill.services.traceext import (
    build_partitions,
    check_hyperbolic_upper_gradient,
    ensemble_tail,
    hajlasz_energy,
    hajlasz_gradients,
    hajlasz_violations,
    poisson_extension,
    restricted_lp_norm,
    trace,
    truncate_extension,
)
from hyperfill.services.uniformize import (
    comparability_constant,
    d_rho_boundary,
    filling_distance_ratios,
    hull_approximation_constant,
    uniformize,
    vertex_to_base_ratios,
)

STABILITY_FACTOR = 2.0
DOUBLING_STABILITY = 1.5
SPREAD_LIMIT = 20.0
DECAY_TOLERANCE = 0.25
LOWER_DECAY_TOLERANCE = 0.4
MIN_R2 = 0.9
TRACE_EXTENSION_LIMIT = 0.05
QUADRATURE_RTOL = 1e-10
EQUIVALENCE_WIDTH = 10.0
ORACLE_VERTEX_LIMIT = 8
EXACT_TOL = 1e-12
HULL_RADIUS_LEVELS = range(1, 6)


class VerifyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Pipeline:
    space: PointCloudSpace
    besov: BesovParams
    filling: FillingGraph
    ugraph: UniformizedGraph
    measure: LiftedMeasure
    partitions: dict[int, PartitionOfUnity]

    @property
    def params(self) -> FillingParams:
        return self.filling.params


def build_pipeline(space: PointCloudSpace, params: FillingParams, besov: BesovParams) -> Pipeline:
    filling = filling_ops.build(space, params)
    ugraph = uniformize(filling)
    return Pipeline(
        space=space,
        besov=besov,
        filling=filling,
        ugraph=ugraph,
        measure=lift_measure(ugraph, space, besov.beta),
        partitions=build_partitions(filling),
    )


@dataclass(eq=False)
class RunContext:
    base: Pipeline
    corpus: Corpus
    exponents: ExponentEstimates | None
    seed: int = 0
    corpus_size: int = 10
    max_centers: int = 16
    path_budget: int = 2
    refined_space: PointCloudSpace | None = None
    _finer: Pipeline | None = None
    _refined: Pipeline | None = None
    _corpora: dict[int, Corpus] = field(default_factory=dict)
    _extensions: dict[int, list[ExtensionResult]] = field(default_factory=dict)

    @property
    def finer(self) -> Pipeline:
        if self._finer is None:
            params = replace(self.base.params, n_max=self.base.params.n_max + 1)
            self._finer = build_pipeline(self.base.space, params, self.base.besov)
        return self._finer

    @property
    def refined(self) -> Pipeline | None:
        if self.refined_space is None:
            return None
        if self._refined is None:
            base = self.base.params
            params = filling_ops.resolve_params(self.refined_space, base.alpha, base.tau)
            self._refined = build_pipeline(self.refined_space, params, self.base.besov)
        return self._refined

    def variants(self, include_refined: bool = True) -> list[tuple[str, Pipeline]]:
        out = [("n_max+1", self.finer)]
        if include_refined and self.refined is not None:
            out.append(("refined", self.refined))
        return out

    def corpus_for(self, pipeline: Pipeline) -> Corpus:
        if pipeline.space is self.base.space:
            return self.corpus
        key = id(pipeline)
        if key not in self._corpora:
            self._corpora[key] = build_corpus(
                pipeline.space,
                pipeline.filling.net,
                pipeline.besov.theta,
                self.seed,
                self.corpus_size,
            )
        return self._corpora[key]

    def extensions_for(self, pipeline: Pipeline) -> list[ExtensionResult]:
        key = id(pipeline)
        if key not in self._extensions:
            corpus = self.corpus_for(pipeline)
            self._extensions[key] = parallel_map(
                lambda f: poisson_extension(pipeline.space, pipeline.ugraph, f), corpus.functions
            )
        return self._extensions[key]

    def graph_functions_for(self, pipeline: Pipeline) -> list[GraphFunction]:
        return graph_corpus(pipeline.space, pipeline.ugraph, self.corpus_for(pipeline))


@dataclass(frozen=True)
class VerifyReport:
    results: tuple[CheckResult, ...]
    summary: dict[str, Any]

    @property
    def ok(self) -> bool:
        return all(result.ok for result in self.results)


def _growth(before: float, after: float) -> float:
    if math.isnan(before) or math.isnan(after):
        return 1.0
    if before <= 0:
        return 1.0 if after <= EXACT_TOL else math.inf
    return after / before


def _spread(values: Sequence[float]) -> float:
    positive = [v for v in values if v > 0 and math.isfinite(v)]
    if not positive:
        return 1.0
    return max(positive) / min(positive)


def _result(
    name: CheckName,
    table: ReportTable | None,
    problems: Sequence[str],
    metrics: dict[str, float] | None = None,
) -> CheckResult:
    status = CheckStatus.FAILED if problems else CheckStatus.PASSED
    return CheckResult(
        name=name,
        status=status,
        table=table,
        reason="; ".join(problems) if problems else "ok",
        metrics=metrics or {},
    )


def _z_balls(pipeline: Pipeline, max_centers: int) -> list[tuple[int, float]]:
    """Capped boundary centers crossed with the level scales strictly inside the level range."""
    params = pipeline.params
    radii = [params.scale(k) for k in range(params.n_min + 1, params.n_max)]
    if not radii:
        radii = [params.scale(params.n_max)]
    centers = capped_subset(range(pipeline.space.size), max_centers)
    return [(z, r) for z in centers for r in radii]


def _nonconstant(functions: Sequence[BoundaryFunction]) -> list[BoundaryFunction]:
    return [f for f in functions if np.ptp(f.values) > EXACT_TOL]


def _full_trace(pipeline: Pipeline, u: GraphFunction) -> np.ndarray:
    n_max = pipeline.params.n_max
    return trace(pipeline.ugraph, pipeline.partitions, u, levels=(n_max,), p=pipeline.besov.p).trace


# ---------------------------------------------------------------------------
# named checks


def _bounded_and_stable(
    ctx: RunContext,
    name: CheckName,
    table_fn: Callable[[Pipeline], ReportTable],
    factor: float = STABILITY_FACTOR,
    include_refined: bool = True,
) -> CheckResult:
    table = table_fn(ctx.base)
    high = table.summary.max
    metrics = {"max_ratio": high}
    problems = []
    if math.isinf(high):
        problems.append("max ratio is not finite")
    for label, pipeline in ctx.variants(include_refined):
        other = table_fn(pipeline).summary.max
        growth = _growth(high, other)
        metrics[f"max_ratio[{label}]"] = other
        metrics[f"growth[{label}]"] = growth
        if growth > factor:
            problems.append(f"max ratio grew {growth:.4g}x under {label}")
    return _result(name, table, problems, metrics)


def _check_structure(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    graph, ugraph = pipeline.filling, pipeline.ugraph
    counts = {
        "nets": len(filling_ops.check_nets(pipeline.space, graph.net)),
        "edges": len(filling_ops.check_edges(graph)),
        "upward_neighbors": len(filling_ops.upward_neighbor_problems(graph)),
        "large_inclusion": len(filling_ops.large_inclusion_violations(graph)),
    }
    distances = ugraph.distances
    asymmetry = float(np.max(np.abs(distances - distances.T)))
    triangle = 0.0
    for k in range(ugraph.n_total):
        detour = distances[:, k, None] + distances[None, k, :]
        triangle = max(triangle, float(np.max(distances - detour)))
    oracle = _d_rho_oracle_gap(ugraph, ctx.max_centers)
    scale = float(distances.max()) or 1.0
    rows = [ReportRow(key, "", float(value), 0.0, float(value)) for key, value in counts.items()]
    rows.append(ReportRow("d_rho_symmetry", "", asymmetry, EXACT_TOL * scale, asymmetry))
    rows.append(ReportRow("d_rho_triangle", "", triangle, EXACT_TOL * scale, triangle))
    rows.append(ReportRow("d_rho_oracle", "", oracle, EXACT_TOL * scale, oracle))
    problems = [f"{key}: {value} problems" for key, value in counts.items() if value]
    for row in rows[len(counts) :]:
        if row.lhs > row.rhs:
            problems.append(f"{row.param1} off by {row.lhs:.3g}")
    metrics = {
        "vertices": float(graph.n_vertices),
        "edges": float(len(ugraph.edges)),
        "max_degree": float(filling_ops.degree_stats(graph).max_degree),
    }
    return _result(CheckName.STRUCTURE, ReportTable("structure", tuple(rows)), problems, metrics)


def _d_rho_oracle_gap(ugraph: UniformizedGraph, max_sources: int) -> float:
    """Largest gap between d_rho and an independent path computation.

    Graphs with at most ORACLE_VERTEX_LIMIT vertices are brute-forced over every simple path;
    larger graphs are compared against networkx Dijkstra from a capped set of sources.
    """
    graph = ugraph.graph
    gap = 0.0
    if ugraph.n_total <= ORACLE_VERTEX_LIMIT:
        for a, b in combinations(range(ugraph.n_total), 2):
            best = min(
                sum(graph[u][v]["rho_length"] for u, v in zip(path, path[1:], strict=False))
                for path in nx.all_simple_paths(graph, a, b)
            )
            gap = max(gap, abs(best - float(ugraph.distances[a, b])))
        return gap
    for source in capped_subset(range(ugraph.n_total), max_sources):
        lengths = nx.single_source_dijkstra_path_length(graph, source, weight="rho_length")
        for target, length in lengths.items():
            gap = max(gap, abs(length - float(ugraph.distances[source, target])))
    return gap


def _check_closed_forms(ctx: RunContext) -> CheckResult:
    ugraph, measure = ctx.base.ugraph, ctx.base.measure

    def errors(e: int) -> tuple[float, float]:
        mass = quadrature_mass(measure, ugraph, e)
        length = quadrature_length(ugraph, e)
        mass_err = abs(mass - measure.edge_mass[e]) / abs(mass)
        length_err = abs(length - ugraph.rho_length[e]) / abs(length)
        return float(mass_err), float(length_err)

    errs = np.array(parallel_map(errors, range(len(ugraph.edges)))).reshape(-1, 2)
    rows = []
    for code, kind in enumerate(EDGE_KINDS_BY_CODE):
        mask = ugraph.edge_kind == code
        if not mask.any():
            continue
        for column, quantity in enumerate(("mass", "rho_length")):
            worst = float(errs[mask, column].max())
            rows.append(
                ReportRow(kind.value, quantity, worst, QUADRATURE_RTOL, worst / QUADRATURE_RTOL)
            )
    problems = [
        f"{row.param1} {row.param2} relative error {row.lhs:.3g}" for row in rows if row.ratio > 1
    ]
    return _result(CheckName.CLOSED_FORMS, ReportTable("closed_forms", tuple(rows)), problems)


def _check_hull_mass(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    space, ugraph, measure = pipeline.space, pipeline.ugraph, pipeline.measure
    beta = measure.beta
    radii = [pipeline.params.scale(k) for k in HULL_RADIUS_LEVELS]

    def rows_for(z: int) -> list[tuple[ReportRow, float]]:
        out = []
        for r in radii:
            h = filling_ops.hull(ugraph, z, r)
            mass = hull_mass(measure, ugraph, h)
            if mass <= 0:
                continue
            nu = space_ops.ball_mass(space, z, r)
            rhs = r**beta * nu
            out.append((ReportRow(space.ids[z], f"{r:.12g}", mass, rhs, mass / rhs), nu))
        return out

    collected = [item for chunk in parallel_map(rows_for, range(space.size)) for item in chunk]
    rows = tuple(row for row, _ in collected)
    spread = _spread([row.ratio for row in rows])
    problems = []
    if spread > SPREAD_LIMIT:
        problems.append(f"ratio spread {spread:.4g} exceeds {SPREAD_LIMIT:g}")

    by_radius: dict[str, tuple[list[float], list[float]]] = {}
    for row, nu in collected:
        masses, nus = by_radius.setdefault(row.param2, ([], []))
        masses.append(math.log(row.lhs))
        nus.append(math.log(nu))
    log_r = np.array([math.log(float(key)) for key in by_radius])
    log_mass = np.array([np.mean(m) for m, _ in by_radius.values()])
    log_nu = np.array([np.mean(n) for _, n in by_radius.values()])
    fit = slope_fit(log_r, log_mass)
    nu_fit = slope_fit(log_r, log_nu)
    metrics = {"spread": spread}
    notes: tuple[str, ...] = ()
    if fit is None or nu_fit is None:
        problems.append("too few radii for a slope fit")
    else:
        target = beta + nu_fit.slope
        metrics.update({"slope": fit.slope, "target_slope": target, "r2": fit.r2})
        # tau-dilated balls at the coarse radii cover most of Z, which flattens the slope
        notes = (f"slope {fit.slope:.4g} against beta + nu slope {target:.4g}; not gated",)
        if fit.r2 < MIN_R2:
            problems.append(f"slope fit r2 {fit.r2:.3g} below {MIN_R2}")
    table = ReportTable("hull_mass", rows, slope=fit, notes=notes)
    return _result(CheckName.HULL_MASS, table, problems, metrics)


def _check_doubling(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        samples = default_samples(pipeline.ugraph, ctx.max_centers)
        return doubling_sweep(pipeline.measure, pipeline.ugraph, samples)

    return _bounded_and_stable(
        ctx, CheckName.DOUBLING, table_fn, factor=DOUBLING_STABILITY, include_refined=False
    )


def _check_lower_decay(ctx: RunContext) -> CheckResult:
    if ctx.exponents is None:
        raise HypothesisError("volume-decay target needs exponent estimates for this space.")
    pipeline = ctx.base
    samples = default_samples(pipeline.ugraph, ctx.max_centers)
    q_prime, constant = lower_decay_fit(pipeline.measure, pipeline.ugraph, samples)
    target = pipeline.besov.q_beta(ctx.exponents.q)
    beta_label = f"beta={pipeline.measure.beta:.12g}"
    row = ReportRow("q_prime", beta_label, q_prime, target, q_prime / target)
    problems = []
    if abs(q_prime - target) > LOWER_DECAY_TOLERANCE:
        problems.append(f"fitted order {q_prime:.4g} not within 0.4 of {target:.4g}")
    metrics = {"q_prime": q_prime, "c": constant, "target": target, "q": ctx.exponents.q}
    return _result(CheckName.LOWER_DECAY, ReportTable("lower_decay", (row,)), problems, metrics)


def _check_level_mass(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        params, measure = pipeline.params, pipeline.measure
        rows = []
        for n in filling_ops.bulk_levels(pipeline.filling):
            lhs = level_mass(measure, pipeline.ugraph, n)
            rhs = params.alpha ** (-measure.beta * n) * pipeline.space.total_mass
            rows.append(ReportRow(str(n), "", lhs, rhs, ratio(lhs, rhs)))
        return ReportTable("level_mass", tuple(rows))

    table = table_fn(ctx.base)
    spread = _spread([row.ratio for row in table.rows])
    adjacent = vertex_mass_ratio(ctx.base.measure, ctx.base.ugraph)
    metrics = {"spread": spread, "vertex_mass_ratio": adjacent}
    problems = []
    if spread > SPREAD_LIMIT:
        problems.append(f"level mass spread {spread:.4g} exceeds {SPREAD_LIMIT:g}")
    for label, pipeline in ctx.variants():
        other = vertex_mass_ratio(pipeline.measure, pipeline.ugraph)
        metrics[f"vertex_mass_ratio[{label}]"] = other
        if other > STABILITY_FACTOR * adjacent:
            problems.append(f"vertex mass ratio grew {other / adjacent:.4g}x under {label}")
    return _result(CheckName.LEVEL_MASS, table, problems, metrics)


def _bulk_radii(pipeline: Pipeline) -> list[float]:
    """alpha^-k for k one below the bulk window: a rho-ball of that radius reaches level k+1."""
    bulk = filling_ops.bulk_levels(pipeline.filling)
    return [pipeline.params.scale(k) for k in range(bulk.start - 1, bulk.stop - 1)]


def _check_ball_mass(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    space, ugraph, measure = pipeline.space, pipeline.ugraph, pipeline.measure
    beta = measure.beta
    radii = _bulk_radii(pipeline)
    centers = capped_subset(range(space.size), ctx.max_centers)
    bulk_vertices = np.flatnonzero(
        np.isin(pipeline.filling.vertex_level, list(filling_ops.bulk_levels(pipeline.filling)))
    )

    def boundary_rows(z: int) -> tuple[list[ReportRow], int]:
        rows, drops, previous = [], 0, 0.0
        for r in sorted(radii):
            lhs = ball_mass_rho(measure, ugraph, z, r)
            if lhs < previous * (1 - EXACT_TOL):
                drops += 1
            previous = lhs
            rhs = r**beta * space_ops.ball_mass(space, z, r)
            label = f"boundary:{space.ids[z]}"
            rows.append(ReportRow(label, f"{r:.12g}", lhs, rhs, ratio(lhs, rhs)))
        return rows, drops

    def interior_row(v: int) -> ReportRow:
        depth = d_rho_boundary(ugraph, v)
        r = depth / 4.0
        lhs = ball_mass(measure, ugraph, v, r)
        rhs = r * depth ** (beta - 1.0) * float(measure.vertex_mass[v])
        return ReportRow(f"interior:{ugraph.vertex_id(v)}", f"{r:.12g}", lhs, rhs, ratio(lhs, rhs))

    collected = parallel_map(boundary_rows, centers)
    rows = [row for chunk, _ in collected for row in chunk]
    drops = sum(d for _, d in collected)
    interior = parallel_map(interior_row, capped_subset(bulk_vertices.tolist(), ctx.max_centers))
    boundary_spread = _spread([row.ratio for row in rows])
    interior_spread = _spread([row.ratio for row in interior])
    problems = []
    if drops:
        problems.append(f"{drops} radius steps where the rho-ball mass decreased")
    if boundary_spread > SPREAD_LIMIT:
        problems.append(f"boundary ball spread {boundary_spread:.4g} exceeds {SPREAD_LIMIT:g}")
    if interior_spread > SPREAD_LIMIT:
        problems.append(f"interior ball spread {interior_spread:.4g} exceeds {SPREAD_LIMIT:g}")
    metrics = {"boundary_spread": boundary_spread, "interior_spread": interior_spread}
    table = ReportTable("ball_mass", tuple(rows + interior))
    return _result(CheckName.BALL_MASS, table, problems, metrics)


def _check_filling_distance(ctx: RunContext) -> CheckResult:
    rows, metrics, problems = [], {}, []
    constants = {}
    for label, pipeline in [("base", ctx.base), *ctx.variants(include_refined=False)]:
        ratios = filling_distance_ratios(pipeline.ugraph)
        constant = comparability_constant(ratios)
        constants[label] = constant
        to_base = vertex_to_base_ratios(pipeline.ugraph)
        rows.append(
            ReportRow(label, "d_rho/model", float(ratios.max()), float(ratios.min()), constant)
        )
        rows.append(
            ReportRow(
                label,
                "vertex_to_base",
                float(to_base.max()),
                float(to_base.min()),
                comparability_constant(to_base),
            )
        )
        metrics[f"C[{label}]"] = constant
    growth = _growth(constants["base"], constants["n_max+1"])
    if growth > STABILITY_FACTOR:
        problems.append(f"comparability constant grew {growth:.4g}x under n_max+1")
    return _result(
        CheckName.FILLING_DISTANCE, ReportTable("filling_distance", tuple(rows)), problems, metrics
    )


def _check_hull_approximation(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        constant = hull_approximation_constant(
            pipeline.ugraph, _z_balls(pipeline, ctx.max_centers)
        )
        return ReportTable("hull_approximation", (ReportRow("C", "", constant, 1.0, constant),))

    return _bounded_and_stable(ctx, CheckName.HULL_APPROXIMATION, table_fn)


def _check_trace_decay(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    p, beta, alpha = pipeline.besov.p, pipeline.measure.beta, pipeline.params.alpha
    target = (beta / p - 1.0) * math.log(alpha)
    bulk = filling_ops.bulk_levels(pipeline.filling)
    levels = np.array(bulk, dtype=float)
    covariance = holder_rough_covariance(pipeline.space, pipeline.filling.net, pipeline.besov.theta)
    tails = np.array(ensemble_tail(pipeline.ugraph, pipeline.partitions, covariance, bulk, p))
    rows = [
        ReportRow("holder_rough", str(n), tail, 0.0, tail)
        for n, tail in zip(bulk, tails, strict=True)
    ]
    problems = []
    metrics = {"target_slope": target}
    keep = tails > 0
    fit = slope_fit(levels[keep], np.log(tails[keep])) if keep.sum() >= 2 else None
    if fit is None:
        problems.append(f"no decay to fit over levels {bulk.start}..{bulk.stop - 1}")
    else:
        metrics.update({"slope": fit.slope, "r2": fit.r2, "ratio": fit.slope / target})
        if abs(fit.slope / target - 1.0) > DECAY_TOLERANCE or fit.r2 < MIN_R2:
            problems.append(f"slope {fit.slope:.4g} (r2 {fit.r2:.3g}) vs {target:.4g}")

    extensions = {id(ext.f): ext for ext in ctx.extensions_for(pipeline)}
    for f in _nonconstant(ctx.corpus.functions):
        result = trace(pipeline.ugraph, pipeline.partitions, extensions[id(f)].pf, bulk, p)
        decay = np.array(result.tail_decay)
        own = decay > 0
        member = slope_fit(levels[own], np.log(decay[own])) if own.sum() >= 2 else None
        if member is not None:
            metrics[f"slope[{f.name}]"] = member.slope
    table = ReportTable(
        "trace_decay",
        tuple(rows),
        slope=fit,
        notes=(f"levels {bulk.start}..{bulk.stop - 1}; single members are reported only",),
    )
    return _result(CheckName.TRACE_DECAY, table, problems, metrics)


def _check_trace_extension(ctx: RunContext) -> CheckResult:
    p = ctx.base.besov.p

    def errors(pipeline: Pipeline) -> list[float]:
        out = []
        for ext in ctx.extensions_for(pipeline):
            f = ext.f
            tu = _full_trace(pipeline, ext.pf)
            norm = lp_norm_boundary(pipeline.space, f, p)
            gap = lp_norm_boundary(pipeline.space, BoundaryFunction(tu - f.values), p)
            out.append(gap / norm if norm > 0 else gap)
        return out

    base, finer = errors(ctx.base), errors(ctx.finer)
    rows = tuple(
        ReportRow(f.name, "", b, a, b)
        for f, b, a in zip(ctx.corpus.functions, base, finer, strict=True)
    )
    problems = []
    for row in rows:
        if row.lhs > TRACE_EXTENSION_LIMIT:
            problems.append(f"{row.param1}: relative error {row.lhs:.4g} above 0.05")
        if row.rhs > row.lhs + EXACT_TOL:
            problems.append(f"{row.param1}: error grew under n_max+1")
    metrics = {"max_error": max(base, default=0.0), "max_error[n_max+1]": max(finer, default=0.0)}
    table = ReportTable("trace_extension", rows)
    return _result(CheckName.TRACE_EXTENSION, table, problems, metrics)


def _check_trace_domination(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        besov = pipeline.besov

        def row(u: GraphFunction) -> ReportRow:
            tu = BoundaryFunction(_full_trace(pipeline, u))
            lhs = besov_norm(pipeline.space, tu, besov.p, besov.theta)
            rhs = dirichlet_norm(pipeline.ugraph, pipeline.measure, u, besov.p)
            return ReportRow(u.name, "", lhs, rhs, ratio(lhs, rhs))

        rows = parallel_map(row, ctx.graph_functions_for(pipeline))
        return ReportTable("trace_domination", tuple(rows))

    return _bounded_and_stable(ctx, CheckName.TRACE_DOMINATION, table_fn)


def _check_extension_domination(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        besov = pipeline.besov

        def row(ext: ExtensionResult) -> ReportRow:
            lhs = dirichlet_norm(pipeline.ugraph, pipeline.measure, ext.pf, besov.p)
            rhs = besov_norm(pipeline.space, ext.f, besov.p, besov.theta)
            return ReportRow(ext.f.name, "", lhs, rhs, ratio(lhs, rhs))

        rows = parallel_map(row, ctx.extensions_for(pipeline))
        return ReportTable("extension_domination", tuple(rows))

    return _bounded_and_stable(ctx, CheckName.EXTENSION_DOMINATION, table_fn)


def _check_extension_decay(ctx: RunContext) -> CheckResult:
    def collect(pipeline: Pipeline) -> tuple[ReportTable, int, dict[str, float]]:
        ugraph, measure = pipeline.ugraph, pipeline.measure
        p, beta, alpha = pipeline.besov.p, measure.beta, pipeline.params.alpha
        bulk = filling_ops.bulk_levels(pipeline.filling)

        def rows_for(ext: ExtensionResult) -> tuple[list[ReportRow], int, float]:
            f_norm = lp_norm_boundary(pipeline.space, ext.f, p)
            rows, breaks, tail = [], 0, []
            for n in pipeline.params.levels:
                restricted = restricted_lp_norm(ugraph, measure, ext.pf, n, p)
                truncated = lp_norm_graph(ugraph, measure, truncate_extension(ext, n), p)
                if truncated > restricted * (1 + 1e-9) + EXACT_TOL:
                    breaks += 1
                rhs = alpha ** (-beta * n / p) * f_norm
                rows.append(ReportRow(ext.f.name, str(n), restricted, rhs, ratio(restricted, rhs)))
                if n in bulk and restricted > 0:
                    tail.append((n, math.log(restricted)))
            fit = slope_fit(*np.array(tail).T) if len(tail) >= 2 else None
            return rows, breaks, math.nan if fit is None else fit.slope

        extensions = [
            ext for ext in ctx.extensions_for(pipeline) if np.ptp(ext.f.values) > EXACT_TOL
        ]
        collected = parallel_map(rows_for, extensions)
        rows = tuple(row for chunk, _, _ in collected for row in chunk)
        slopes = {
            f"slope[{ext.f.name}]": slope
            for ext, (_, _, slope) in zip(extensions, collected, strict=True)
            if math.isfinite(slope)
        }
        breaks = sum(b for _, b, _ in collected)
        return ReportTable("extension_decay", rows), breaks, slopes

    table, breaks, slopes = collect(ctx.base)
    besov = ctx.base.besov
    target = -(besov.beta / besov.p) * math.log(ctx.base.params.alpha)
    high = table.summary.max
    metrics = {"max_ratio": high, "target_slope": target, **slopes}
    problems = []
    if breaks:
        problems.append(f"truncation exceeded the restricted norm {breaks} times")
    if not math.isfinite(high):
        problems.append("max ratio is not finite")
    for label, pipeline in ctx.variants():
        other, other_breaks, _ = collect(pipeline)
        growth = _growth(high, other.summary.max)
        metrics[f"max_ratio[{label}]"] = other.summary.max
        metrics[f"growth[{label}]"] = growth
        if other_breaks:
            problems.append(f"truncation exceeded the restricted norm under {label}")
        if growth > STABILITY_FACTOR:
            problems.append(f"max ratio grew {growth:.4g}x under {label}")
    return _result(CheckName.EXTENSION_DECAY, table, problems, metrics)


def _check_besov_convergence(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    p, theta = pipeline.besov.p, pipeline.besov.theta
    space = pipeline.space
    n_min = pipeline.params.n_min

    def rows_for(ext: ExtensionResult) -> tuple[list[ReportRow], float, int, bool]:
        f = ext.f
        norm = besov_norm(space, f, p, theta)
        result = trace(pipeline.ugraph, pipeline.partitions, ext.pf, p=p)
        errors, partial_norms, rows = [], [], []
        for n in result.levels:
            partial = result.partial[n]
            err = besov_norm(space, BoundaryFunction(partial - f.values), p, theta)
            errors.append(err)
            partial_norms.append(besov_norm(space, BoundaryFunction(partial), p, theta))
            rows.append(ReportRow(f.name, str(n), err, norm, ratio(err, norm)))
        constant = max(partial_norms) / norm
        # first level from which the error never increases again
        start = len(errors) - 1
        while start > 0 and errors[start - 1] >= errors[start] * (1 - EXACT_TOL):
            start -= 1
        decreasing = errors[-1] <= errors[0] * (1 + EXACT_TOL)
        return rows, constant, result.levels[start] - n_min, decreasing

    extensions = [ext for ext in ctx.extensions_for(pipeline) if np.ptp(ext.f.values) > EXACT_TOL]
    collected = parallel_map(rows_for, extensions)
    rows = tuple(row for chunk, _, _, _ in collected for row in chunk)
    constant = max((c for _, c, _, _ in collected), default=0.0)
    offset = max((n0 for _, _, n0, _ in collected), default=0)
    problems = [
        f"{ext.f.name}: partial traces do not approach f"
        for ext, (_, _, _, decreasing) in zip(extensions, collected, strict=True)
        if not decreasing
    ]
    if not math.isfinite(constant):
        problems.append("partial trace norms are not bounded")
    metrics = {"c": constant, "n0": float(offset)}
    table = ReportTable("besov_convergence", rows)
    return _result(CheckName.BESOV_CONVERGENCE, table, problems, metrics)


def _check_besov_equivalence(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        besov, alpha = pipeline.besov, pipeline.params.alpha

        def row(f: BoundaryFunction) -> ReportRow:
            lhs = besov_norm_dyadic(pipeline.space, f, besov.p, besov.theta, alpha)
            rhs = besov_norm(pipeline.space, f, besov.p, besov.theta)
            return ReportRow(f.name, "", lhs, rhs, ratio(lhs, rhs))

        rows = parallel_map(row, _nonconstant(ctx.corpus_for(pipeline).functions))
        return ReportTable("besov_equivalence", tuple(rows))

    table = table_fn(ctx.base)
    width = _spread([row.ratio for row in table.rows])
    metrics = {"width": width}
    problems = []
    if width > EQUIVALENCE_WIDTH:
        problems.append(f"ratio interval width {width:.4g} exceeds {EQUIVALENCE_WIDTH:g}")
    if ctx.refined is not None:
        refined_width = _spread([row.ratio for row in table_fn(ctx.refined).rows])
        metrics["width[refined]"] = refined_width
        if refined_width > STABILITY_FACTOR * width:
            problems.append(f"ratio width grew {refined_width / width:.4g}x under refinement")
    return _result(CheckName.BESOV_EQUIVALENCE, table, problems, metrics)


def _check_poincare_trace(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        return check_poincare_trace(
            pipeline.space,
            pipeline.ugraph,
            pipeline.measure,
            ctx.graph_functions_for(pipeline),
            _z_balls(pipeline, ctx.max_centers),
            pipeline.partitions,
            pipeline.besov.p,
        )

    return _bounded_and_stable(ctx, CheckName.POINCARE_TRACE, table_fn)


def _check_extension_poincare(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        balls = _z_balls(pipeline, ctx.max_centers)
        return check_extension_poincare(
            pipeline.space,
            pipeline.ugraph,
            pipeline.measure,
            ctx.corpus_for(pipeline).functions,
            balls,
            pipeline.besov.p,
            hull_approximation_constant(pipeline.ugraph, balls),
        )

    return _bounded_and_stable(ctx, CheckName.EXTENSION_POINCARE, table_fn)


def _check_holder(ctx: RunContext) -> CheckResult:
    if ctx.exponents is None:
        raise HypothesisError("holder check needs volume exponent estimates for this space.")

    def table_fn(pipeline: Pipeline) -> ReportTable:
        return check_holder(
            pipeline.space,
            pipeline.ugraph,
            pipeline.measure,
            ctx.corpus_for(pipeline).functions,
            pipeline.besov,
            ctx.exponents.q,
            _z_balls(pipeline, ctx.max_centers),
        )

    return _bounded_and_stable(ctx, CheckName.HOLDER, table_fn)


def _check_sobolev_qstar(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        return check_sobolev_qstar(
            pipeline.space,
            pipeline.ugraph,
            pipeline.measure,
            ctx.corpus_for(pipeline).functions,
            pipeline.besov,
            ctx.exponents,
            _z_balls(pipeline, ctx.max_centers),
        )

    return _bounded_and_stable(ctx, CheckName.SOBOLEV_QSTAR, table_fn)


def _theta_q_exponent(ctx: RunContext) -> float:
    besov = ctx.base.besov
    if ctx.exponents is not None:
        q_star = besov.q_star(ctx.exponents.q)
        if q_star is not None:
            return q_star
    return 2.0 * besov.p


def _check_theta_q(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    q = _theta_q_exponent(ctx)
    balls = sorted(_z_balls(pipeline, ctx.max_centers), key=lambda ball: (ball[0], ball[1]))
    alpha = pipeline.params.alpha

    def value(ball: tuple[int, float]) -> float:
        return compute_theta_q(pipeline.space, pipeline.besov, q, ball, alpha)

    values = parallel_map(value, balls)
    rows = []
    previous: dict[int, float] = {}
    for (z, r), theta_value in zip(balls, values, strict=True):
        before = previous.get(z, theta_value)
        rows.append(
            ReportRow(
                pipeline.space.ids[z], f"{r:.12g}", theta_value, before, ratio(theta_value, before)
            )
        )
        previous[z] = theta_value
    problems = [
        f"Theta_q decreased at {row.param1}@{row.param2}"
        for row in rows
        if row.lhs < row.rhs * (1 - EXACT_TOL)
    ]
    return _result(CheckName.THETA_Q, ReportTable("theta_q", tuple(rows)), problems, {"q": q})


def _check_hajlasz(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    theta, alpha = pipeline.besov.theta, pipeline.params.alpha

    def row(ext: ExtensionResult) -> ReportRow:
        g = edge_gradients(pipeline.ugraph, ext.pf)
        gradients = hajlasz_gradients(pipeline.ugraph, g, theta)
        violations, tested = hajlasz_violations(pipeline.space, ext.f, gradients, theta, alpha)
        count = float(len(violations))
        return ReportRow(ext.f.name, "", count, float(tested), count)

    rows = tuple(parallel_map(row, ctx.extensions_for(pipeline)))
    problems = [f"{row.param1}: {int(row.lhs)} violating pairs" for row in rows if row.lhs]
    metrics = {"pairs_tested": float(sum(row.rhs for row in rows))}
    return _result(CheckName.HAJLASZ, ReportTable("hajlasz", rows), problems, metrics)


def _check_hajlasz_besov(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        besov = pipeline.besov

        def row(ext: ExtensionResult) -> ReportRow:
            g = edge_gradients(pipeline.ugraph, ext.pf)
            gradients = hajlasz_gradients(pipeline.ugraph, g, besov.theta)
            lhs = besov_norm(pipeline.space, ext.f, besov.p, besov.theta) ** besov.p
            rhs = hajlasz_energy(pipeline.space, gradients, besov.p)
            return ReportRow(ext.f.name, "", lhs, rhs, ratio(lhs, rhs))

        return ReportTable("hajlasz_besov", tuple(parallel_map(row, ctx.extensions_for(pipeline))))

    return _bounded_and_stable(ctx, CheckName.HAJLASZ_BESOV, table_fn)


def _check_upper_gradient(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base

    def row(ext: ExtensionResult) -> ReportRow:
        g = edge_gradients(pipeline.ugraph, ext.pf)
        violations = check_hyperbolic_upper_gradient(
            pipeline.space,
            pipeline.ugraph,
            ext.f,
            g,
            path_budget=ctx.path_budget,
            max_pairs=4 * ctx.max_centers,
            seed=ctx.seed,
        )
        count = float(len(violations))
        return ReportRow(ext.f.name, f"paths<={1 + ctx.path_budget}", count, 0.0, count)

    rows = tuple(parallel_map(row, ctx.extensions_for(pipeline)))
    problems = [f"{row.param1}: {int(row.lhs)} violating pairs" for row in rows if row.lhs]
    return _result(CheckName.UPPER_GRADIENT, ReportTable("upper_gradient", rows), problems)


def _check_newtonian_trace(ctx: RunContext) -> CheckResult:
    def table_fn(pipeline: Pipeline) -> ReportTable:
        besov = pipeline.besov

        def row(u: GraphFunction) -> ReportRow:
            tu = BoundaryFunction(_full_trace(pipeline, u))
            lhs = check_besov_norm(pipeline.space, tu, besov.p, besov.theta)
            rhs = newtonian_norm(pipeline.ugraph, pipeline.measure, u, besov.p)
            return ReportRow(u.name, "", lhs, rhs, ratio(lhs, rhs))

        return ReportTable(
            "newtonian_trace", tuple(parallel_map(row, ctx.graph_functions_for(pipeline)))
        )

    return _bounded_and_stable(ctx, CheckName.NEWTONIAN_TRACE, table_fn)


def _check_truncation(ctx: RunContext) -> CheckResult:
    pipeline = ctx.base
    besov = pipeline.besov

    def row(f: BoundaryFunction) -> ReportRow:
        lo, hi = np.quantile(f.values, [0.25, 0.75])
        lhs = besov_norm(pipeline.space, truncate(f, float(lo), float(hi)), besov.p, besov.theta)
        rhs = besov_norm(pipeline.space, f, besov.p, besov.theta)
        return ReportRow(f.name, f"[{lo:.6g},{hi:.6g}]", lhs, rhs, ratio(lhs, rhs))

    rows = tuple(parallel_map(row, ctx.corpus.functions))
    problems = [
        f"{row.param1}: truncation raised the Besov norm"
        for row in rows
        if row.lhs > row.rhs * (1 + EXACT_TOL) + EXACT_TOL
    ]
    return _result(CheckName.TRUNCATION, ReportTable("truncation", rows), problems)


CHECKS: dict[CheckName, Callable[[RunContext], CheckResult]] = {
    CheckName.STRUCTURE: _check_structure,
    CheckName.CLOSED_FORMS: _check_closed_forms,
    CheckName.HULL_MASS: _check_hull_mass,
    CheckName.DOUBLING: _check_doubling,
    CheckName.LOWER_DECAY: _check_lower_decay,
    CheckName.LEVEL_MASS: _check_level_mass,
    CheckName.BALL_MASS: _check_ball_mass,
    CheckName.FILLING_DISTANCE: _check_filling_distance,
    CheckName.HULL_APPROXIMATION: _check_hull_approximation,
    CheckName.TRACE_DECAY: _check_trace_decay,
    CheckName.TRACE_EXTENSION: _check_trace_extension,
    CheckName.TRACE_DOMINATION: _check_trace_domination,
    CheckName.EXTENSION_DOMINATION: _check_extension_domination,
    CheckName.EXTENSION_DECAY: _check_extension_decay,
    CheckName.BESOV_CONVERGENCE: _check_besov_convergence,
    CheckName.BESOV_EQUIVALENCE: _check_besov_equivalence,
    CheckName.POINCARE_TRACE: _check_poincare_trace,
    CheckName.EXTENSION_POINCARE: _check_extension_poincare,
    CheckName.HOLDER: _check_holder,
    CheckName.SOBOLEV_QSTAR: _check_sobolev_qstar,
    CheckName.THETA_Q: _check_theta_q,
    CheckName.HAJLASZ: _check_hajlasz,
    CheckName.HAJLASZ_BESOV: _check_hajlasz_besov,
    CheckName.UPPER_GRADIENT: _check_upper_gradient,
    CheckName.NEWTONIAN_TRACE: _check_newtonian_trace,
    CheckName.TRUNCATION: _check_truncation,
}


# ---------------------------------------------------------------------------
# orchestration


def run_checks(
    ctx: RunContext, checks: Sequence[CheckName], logger: EventLogger | None = None
) -> list[CheckResult]:
    results = []
    for name in checks:
        stage = f"check:{name.value}"
        started = time.perf_counter()
        if logger:
            logger.log(event_type="stage_start", stage=stage)
        try:
            result = CHECKS[name](ctx)
        except HypothesisError as exc:
            result = CheckResult(name=name, status=CheckStatus.SKIPPED, table=None, reason=str(exc))
            if logger:
                logger.log(event_type="check_skipped", stage=stage, detail={"reason": str(exc)})
            results.append(result)
            continue
        except Exception as exc:
            raise VerifyError(f"stage {stage} failed: {exc}") from exc
        if logger:
            event = "check_done" if result.ok else "check_failed"
            logger.log(
                event_type=event,
                stage=stage,
                detail={"reason": result.reason, "seconds": time.perf_counter() - started},
            )
        results.append(result)
    return results


def _stage(name: str, logger: EventLogger | None, fn: Callable[[], Any]) -> Any:
    started = time.perf_counter()
    if logger:
        logger.log(event_type="stage_start", stage=name)
    try:
        value = fn()
    except Exception as exc:
        raise VerifyError(f"stage {name} failed: {exc}") from exc
    if logger:
        logger.log(
            event_type="stage_done", stage=name, detail={"seconds": time.perf_counter() - started}
        )
    return value


def prepare_context(
    space: PointCloudSpace,
    config: RunConfig,
    logger: EventLogger | None = None,
    refined_space: PointCloudSpace | None = None,
) -> RunContext:
    def resolve() -> tuple[BesovParams, FillingParams]:
        besov = BesovParams(config.besov.p, config.besov.theta)
        filling = config.filling
        params = filling_ops.resolve_params(
            space, filling.alpha, filling.tau, filling.n_min, filling.n_max
        )
        return besov, params

    besov, params = _stage("params", logger, resolve)
    graph = _stage("filling", logger, lambda: filling_ops.build(space, params))
    ugraph = _stage("uniformize", logger, lambda: uniformize(graph))
    measure = _stage("measure", logger, lambda: lift_measure(ugraph, space, besov.beta))
    pipeline = Pipeline(
        space=space,
        besov=besov,
        filling=graph,
        ugraph=ugraph,
        measure=measure,
        partitions=_stage("partitions", logger, lambda: build_partitions(graph)),
    )

    def exponents() -> ExponentEstimates | None:
        try:
            grid = space_ops.default_scale_grid(space, params.alpha)
            return space_ops.estimate_exponents(space, grid)
        except ValidationError:
            return None

    estimates = _stage("exponents", logger, exponents)
    seed = config.seed if config.seed is not None else 0
    corpus = _stage(
        "corpus",
        logger,
        lambda: build_corpus(space, pipeline.filling.net, besov.theta, seed, config.corpus_size),
    )
    return RunContext(
        base=pipeline,
        corpus=corpus,
        exponents=estimates,
        seed=seed,
        corpus_size=config.corpus_size,
        max_centers=config.max_centers,
        path_budget=config.path_budget,
        refined_space=refined_space,
    )


def build_summary(ctx: RunContext, results: Sequence[CheckResult]) -> dict[str, Any]:
    pipeline = ctx.base
    params, besov, space = pipeline.params, pipeline.besov, pipeline.space
    exponents = ctx.exponents
    checks = {}
    for result in results:
        table = result.table
        summary = table.summary if table is not None else None
        checks[result.name.value] = {
            "status": result.status.value,
            "table": table.name if table is not None else None,
            "reason": result.reason,
            "metrics": dict(sorted(result.metrics.items())),
            "summary": None
            if summary is None
            else {
                "name": summary.name,
                "min": summary.min,
                "max": summary.max,
                "geomean": summary.geomean,
                "count": summary.count,
            },
            "slope": None
            if table is None or table.slope is None
            else {
                "slope": table.slope.slope,
                "intercept": table.slope.intercept,
                "stderr": table.slope.stderr,
                "r2": table.slope.r2,
            },
            "notes": list(table.notes) if table is not None else [],
        }
    return {
        "space": {
            "size": space.size,
            "diameter": space.diameter,
            "min_distance": space.min_distance,
            "total_mass": space.total_mass,
        },
        "filling": {
            "alpha": params.alpha,
            "tau": params.tau,
            "n_min": params.n_min,
            "n_max": params.n_max,
            "vertices": pipeline.filling.n_vertices,
            "edges": len(pipeline.ugraph.edges),
        },
        "besov": {"p": besov.p, "theta": besov.theta, "beta": besov.beta},
        "seed": ctx.seed,
        "exponents": None
        if exponents is None
        else {
            "c_nu": exponents.c_nu,
            "q": exponents.q,
            "c_low": exponents.c_low,
            "eta": exponents.eta,
            "c_rev": exponents.c_rev,
        },
        "checks": checks,
        "passed": all(result.ok for result in results),
    }


def run_all(
    space: PointCloudSpace,
    config: RunConfig,
    logger: EventLogger | None = None,
    refined_space: PointCloudSpace | None = None,
) -> VerifyReport:
    """Build the pipeline, run every configured check and write the bundle to config.output_dir."""
    ctx = prepare_context(space, config, logger, refined_space)
    results = run_checks(ctx, config.checks, logger)
    summary = build_summary(ctx, results)
    tables = [result.table for result in results if result.table is not None]
    _stage(
        "bundle",
        logger,
        lambda: write_bundle(config.output_dir, summary, tables, xlsx=config.xlsx),
    )
    return VerifyReport(results=tuple(results), summary=summary)


def format_summary_report(summary: dict[str, Any]) -> list[str]:
    checks = summary.get("checks", {})
    statuses = [entry["status"] for entry in checks.values()]
    lines = [
        "summary"
        f" checks={len(statuses)}"
        f" passed={statuses.count(CheckStatus.PASSED.value)}"
        f" failed={statuses.count(CheckStatus.FAILED.value)}"
        f" skipped={statuses.count(CheckStatus.SKIPPED.value)}"
    ]
    for name, entry in checks.items():
        stats = entry.get("summary")
        high = f" max={stats['max']}" if stats else ""
        lines.append(f"{name} {entry['status']}{high} reason={entry['reason']}")
    return lines
