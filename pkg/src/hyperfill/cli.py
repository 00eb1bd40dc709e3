from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Annotated, Any

import typer

from hyperfill import __version__
from hyperfill.adapters.files.funcfile import (
    load_boundary_function,
    load_graph_function,
    save_boundary_function,
    save_graph_function,
)
from hyperfill.adapters.files.graphfile import (
    GRAPH_DOT,
    GRAPH_JSON,
    STATS_JSON,
    stats_payload,
    write_graph_dot,
    write_graph_json,
    write_stats,
)
from hyperfill.adapters.files.spacefile import SpaceFileError, load_space, save_space
from hyperfill.config import (
    ConfigError,
    RunConfig,
    SpaceSource,
    read_run_mapping,
    resolve_threads,
    run_config_from_mapping,
)
from hyperfill.domain.models import BesovParams, BoundaryFunction, GraphFunction, PointCloudSpace
from hyperfill.domain.rules import ConsistencyError, ValidationError
from hyperfill.services import funcspace, traceext
from hyperfill.services import space as space_ops
from hyperfill.services.events import EventLogger
from hyperfill.services.filling import resolve_params
from hyperfill.services.numerics import THREADS_ENV
from hyperfill.services.utils import json_ready
from hyperfill.services.verify import (
    Pipeline,
    VerifyError,
    build_pipeline,
    format_summary_report,
    run_all,
)

app = typer.Typer(help="Hyperbolic fillings of finite metric measure spaces")

EVENTS_PATH = Path("logs") / "events.ndjson"
CLI_ERRORS = (ValidationError, ConfigError, SpaceFileError, ConsistencyError, VerifyError)

ConfigOpt = Annotated[Path | None, typer.Option("--config", help="YAML run config.")]
SpaceOpt = Annotated[Path | None, typer.Option("--space", help="Space file (.csv or .json).")]
KindOpt = Annotated[str | None, typer.Option("--kind", help="Generator kind.")]
NOpt = Annotated[int | None, typer.Option("--n", help="Grid/circle size.")]
LevelOpt = Annotated[int | None, typer.Option("--level", help="Cantor level.")]
EpsOpt = Annotated[float | None, typer.Option("--eps", help="Snowflake exponent in (0, 1].")]
BaseOpt = Annotated[str | None, typer.Option("--base", help="Snowflake base generator.")]
AlphaOpt = Annotated[float | None, typer.Option("--alpha")]
TauOpt = Annotated[float | None, typer.Option("--tau")]
NMinOpt = Annotated[int | None, typer.Option("--n-min")]
NMaxOpt = Annotated[int | None, typer.Option("--n-max")]
POpt = Annotated[float | None, typer.Option("--p")]
ThetaOpt = Annotated[float | None, typer.Option("--theta")]


def _show_version(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    version: bool = typer.Option(
        False, "--version", callback=_show_version, is_eager=True, help="Show version and exit."
    ),
    threads: int | None = typer.Option(
        None, "--threads", help=f"Worker threads (default: {THREADS_ENV} or 1)."
    ),
) -> None:
    try:
        count = resolve_threads(threads)
    except ConfigError as exc:
        raise typer.BadParameter(str(exc)) from exc
    if threads is not None:
        os.environ[THREADS_ENV] = str(count)
    ctx.obj = {"threads": threads}


@app.command("gen-space")
def gen_space(
    kind: str = typer.Argument(..., help="interval-grid, circle, cantor or snowflake."),
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    out: Path = typer.Option(Path("space.csv"), "--out", help="Output file (.csv or .json)."),
) -> None:
    """Write a generated space to a space file."""
    try:
        space = space_ops.generate_space(kind, _generator_params(n, level, eps, base))
        save_space(space, out)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    typer.echo(f"Wrote {space.size} points to {out}")


@app.command("build")
def build(
    config: ConfigOpt = None,
    space: SpaceOpt = None,
    kind: KindOpt = None,
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    alpha: AlphaOpt = None,
    tau: TauOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    p: POpt = None,
    theta: ThetaOpt = None,
    out: Path = typer.Option(Path("build"), "--out", help="Output directory."),
    json_output: bool = typer.Option(False, "--json", help="Emit stats as JSON."),
) -> None:
    """Build and uniformize the filling; write graph.json, graph.dot and stats.json."""
    try:
        run = _run_config(
            config, space, kind, n, level, eps, base, alpha, tau, n_min, n_max, p, theta
        )
        pipeline = _pipeline(run)
        write_graph_json(pipeline.ugraph, pipeline.measure, out / GRAPH_JSON)
        write_graph_dot(pipeline.ugraph, out / GRAPH_DOT)
        write_stats(pipeline.ugraph, pipeline.measure, out / STATS_JSON)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    if json_output:
        _echo_json(stats_payload(pipeline.ugraph, pipeline.measure))
        return
    params = pipeline.params
    typer.echo(
        f"levels {params.n_min}..{params.n_max}"
        f" vertices={pipeline.ugraph.n_total} edges={len(pipeline.ugraph.edges)}"
    )
    typer.echo(f"Wrote {out / GRAPH_JSON}, {out / GRAPH_DOT}, {out / STATS_JSON}")


@app.command("norms")
def norms(
    function: Annotated[
        Path | None, typer.Option("--function", help="Boundary function file (id,value).")
    ] = None,
    graph_function: Annotated[
        Path | None, typer.Option("--graph-function", help="Graph function file (vertex id,value).")
    ] = None,
    config: ConfigOpt = None,
    space: SpaceOpt = None,
    kind: KindOpt = None,
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    alpha: AlphaOpt = None,
    tau: TauOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    p: POpt = None,
    theta: ThetaOpt = None,
) -> None:
    """Besov norms of a boundary function, or Dirichlet/Newtonian norms of a graph function."""
    if (function is None) == (graph_function is None):
        raise typer.BadParameter("Pass exactly one of --function and --graph-function.")
    try:
        run = _run_config(
            config, space, kind, n, level, eps, base, alpha, tau, n_min, n_max, p, theta
        )
        pipeline = _pipeline(run)
        if function is not None:
            f = load_boundary_function(function, pipeline.space)
            payload = _boundary_norms(pipeline, f)
        else:
            u = load_graph_function(graph_function, pipeline.ugraph)
            payload = _graph_norms(pipeline, u)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    _echo_json(payload)


@app.command("trace")
def trace_cmd(
    graph_function: Annotated[
        Path, typer.Option("--graph-function", help="Graph function file (vertex id,value).")
    ],
    out: Path = typer.Option(Path("trace.csv"), "--out", help="Boundary function output."),
    config: ConfigOpt = None,
    space: SpaceOpt = None,
    kind: KindOpt = None,
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    alpha: AlphaOpt = None,
    tau: TauOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    p: POpt = None,
    theta: ThetaOpt = None,
) -> None:
    """Trace a graph function to the boundary; print the partial-trace decay series."""
    try:
        run = _run_config(
            config, space, kind, n, level, eps, base, alpha, tau, n_min, n_max, p, theta
        )
        pipeline = _pipeline(run)
        u = load_graph_function(graph_function, pipeline.ugraph)
        result = traceext.trace(pipeline.ugraph, pipeline.partitions, u, p=pipeline.besov.p)
        save_boundary_function(BoundaryFunction(result.trace, "trace"), pipeline.space, out)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    _echo_json(
        {
            "levels": list(result.levels),
            "step_decay": list(result.step_decay),
            "tail_decay": list(result.tail_decay),
            "output": out,
        }
    )


@app.command("extend")
def extend(
    function: Annotated[
        Path, typer.Option("--function", help="Boundary function file (id,value).")
    ],
    out: Path = typer.Option(Path("extension.csv"), "--out", help="Graph function output."),
    lipschitz: bool = typer.Option(
        False, "--lipschitz", help="Use f(pi(v)) instead of the Poisson extension."
    ),
    config: ConfigOpt = None,
    space: SpaceOpt = None,
    kind: KindOpt = None,
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    alpha: AlphaOpt = None,
    tau: TauOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    p: POpt = None,
    theta: ThetaOpt = None,
) -> None:
    """Extend a boundary function into the filling and write the vertex values."""
    try:
        run = _run_config(
            config, space, kind, n, level, eps, base, alpha, tau, n_min, n_max, p, theta
        )
        pipeline = _pipeline(run)
        f = load_boundary_function(function, pipeline.space)
        if lipschitz:
            u = traceext.lipschitz_extension(pipeline.space, pipeline.ugraph, f)
        else:
            u = traceext.poisson_extension(pipeline.space, pipeline.ugraph, f).pf
        save_graph_function(u, pipeline.ugraph, out)
        payload = _graph_norms(pipeline, u)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    payload["output"] = out
    _echo_json(payload)


@app.command("verify")
def verify(
    ctx: typer.Context,
    config: ConfigOpt = None,
    checks: Annotated[
        str | None, typer.Option("--checks", help="Comma-separated check names or 'all'.")
    ] = None,
    out: Annotated[Path | None, typer.Option("--out", help="Bundle directory.")] = None,
    seed: Annotated[int | None, typer.Option("--seed", help="Corpus seed.")] = None,
    events: bool = typer.Option(
        True, "--events/--no-events", help="Write stage events to <bundle>/logs/events.ndjson."
    ),
    xlsx: bool = typer.Option(False, "--xlsx", help="Also write report.xlsx."),
    space: SpaceOpt = None,
    kind: KindOpt = None,
    n: NOpt = None,
    level: LevelOpt = None,
    eps: EpsOpt = None,
    base: BaseOpt = None,
    alpha: AlphaOpt = None,
    tau: TauOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    p: POpt = None,
    theta: ThetaOpt = None,
) -> None:
    """Run the named checks and write the report bundle; exit 1 when a check fails."""
    extra: dict[str, Any] = {}
    if checks is not None:
        extra["checks"] = checks
    if out is not None:
        extra["output_dir"] = str(out.resolve())
    if seed is not None:
        extra["seed"] = seed
    if xlsx:
        extra["xlsx"] = True
    try:
        run = _run_config(
            config,
            space,
            kind,
            n,
            level,
            eps,
            base,
            alpha,
            tau,
            n_min,
            n_max,
            p,
            theta,
            extra=extra,
            require_seed=True,
        )
        if (ctx.obj or {}).get("threads") is None and not os.getenv(THREADS_ENV):
            os.environ[THREADS_ENV] = str(run.threads)
        point_cloud = _load_source(run.space)
        refined = _refined_source(run.space) if run.refine_space else None
        logger = EventLogger(
            path=run.output_dir / EVENTS_PATH, run=_run_name(config), enabled=events
        )
        report = run_all(point_cloud, run, logger=logger, refined_space=refined)
    except CLI_ERRORS as exc:
        _exit_with_error(str(exc))
    for line in format_summary_report(report.summary):
        typer.echo(line)
    typer.echo(f"Bundle written to {run.output_dir}")
    if not report.ok:
        raise typer.Exit(code=1)


def _generator_params(
    n: int | None, level: int | None, eps: float | None, base: str | None
) -> dict[str, Any]:
    params = {"n": n, "level": level, "eps": eps, "base": base}
    return {key: value for key, value in params.items() if value is not None}


def _run_config(
    config: Path | None,
    space: Path | None,
    kind: str | None,
    n: int | None,
    level: int | None,
    eps: float | None,
    base: str | None,
    alpha: float | None,
    tau: float | None,
    n_min: int | None,
    n_max: int | None,
    p: float | None,
    theta: float | None,
    extra: dict[str, Any] | None = None,
    require_seed: bool = False,
) -> RunConfig:
    """Config file (if any) with command-line flags layered on top."""
    data = read_run_mapping(config) if config is not None else {}
    base_dir = config.parent if config is not None else Path(".")
    if space is not None and kind is not None:
        raise typer.BadParameter("Pass at most one of --space and --kind.")
    if space is not None:
        data["space"] = {"path": str(space.resolve())}
    elif kind is not None:
        data["space"] = {"kind": kind, "params": _generator_params(n, level, eps, base)}
    elif "space" not in data:
        raise typer.BadParameter("A space is required: --config, --space or --kind.")
    for section, values in (
        ("filling", {"alpha": alpha, "tau": tau, "n_min": n_min, "n_max": n_max}),
        ("besov", {"p": p, "theta": theta}),
    ):
        merged = dict(data.get(section) or {})
        merged.update({key: value for key, value in values.items() if value is not None})
        data[section] = merged
    data.update(extra or {})
    return run_config_from_mapping(data, base_dir=base_dir, require_seed=require_seed)


def _load_source(source: SpaceSource) -> PointCloudSpace:
    if source.generated:
        return space_ops.generate_space(source.kind, source.params)
    return load_space(source.path, source.format)


def _refined_source(source: SpaceSource) -> PointCloudSpace | None:
    if not source.generated:
        return None
    params = space_ops.refine_params(source.kind, source.params)
    return space_ops.generate_space(source.kind, params)


def _pipeline(run: RunConfig) -> Pipeline:
    point_cloud = _load_source(run.space)
    filling = run.filling
    params = resolve_params(point_cloud, filling.alpha, filling.tau, filling.n_min, filling.n_max)
    return build_pipeline(point_cloud, params, BesovParams(run.besov.p, run.besov.theta))


def _boundary_norms(pipeline: Pipeline, f: BoundaryFunction) -> dict[str, Any]:
    besov, alpha = pipeline.besov, pipeline.params.alpha
    point_cloud = pipeline.space
    extension = traceext.poisson_extension(point_cloud, pipeline.ugraph, f).pf
    return {
        "function": f.name,
        "p": besov.p,
        "theta": besov.theta,
        "lp": funcspace.lp_norm_boundary(point_cloud, f, besov.p),
        "besov": funcspace.besov_norm(point_cloud, f, besov.p, besov.theta),
        "besov_dyadic": funcspace.besov_norm_dyadic(
            point_cloud, f, besov.p, besov.theta, alpha
        ),
        "besov_full": funcspace.check_besov_norm(point_cloud, f, besov.p, besov.theta),
        "lipschitz": funcspace.lipschitz_constant(point_cloud, f),
        "extension": _graph_norms(pipeline, extension),
    }


def _graph_norms(pipeline: Pipeline, u: GraphFunction) -> dict[str, Any]:
    p = pipeline.besov.p
    return {
        "function": u.name,
        "lp": funcspace.lp_norm_graph(pipeline.ugraph, pipeline.measure, u, p),
        "dirichlet": funcspace.dirichlet_norm(pipeline.ugraph, pipeline.measure, u, p),
        "newtonian": funcspace.newtonian_norm(pipeline.ugraph, pipeline.measure, u, p),
    }


def _run_name(config: Path | None) -> str:
    return config.stem if config is not None else "cli"


def _echo_json(payload: dict[str, Any]) -> None:
    typer.echo(json.dumps(json_ready(payload), indent=2, sort_keys=True))


def _exit_with_error(message: str) -> None:
    typer.echo(f"Error: {message}", err=True)
    raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
