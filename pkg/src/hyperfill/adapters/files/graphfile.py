from __future__ import annotations

from pathlib import Path
from typing import Any

from hyperfill.domain.models import EDGE_KINDS_BY_CODE, LiftedMeasure, UniformizedGraph
from hyperfill.services import filling as filling_ops
from hyperfill.services.exports import write_json
from hyperfill.services.measure import level_mass
from hyperfill.services.utils import format12

GRAPH_JSON = "graph.json"
GRAPH_DOT = "graph.dot"
STATS_JSON = "stats.json"


def graph_payload(ugraph: UniformizedGraph, measure: LiftedMeasure) -> dict[str, Any]:
    filling = ugraph.filling
    params = filling.params
    vertices = []
    for v in range(ugraph.n_total):
        boundary = ugraph.is_boundary(v)
        point = v - ugraph.n_interior if boundary else int(filling.vertex_center[v])
        vertices.append(
            {
                "id": ugraph.vertex_id(v),
                "level": None if boundary else int(filling.vertex_level[v]),
                "center": filling.space.ids[point],
                "ball_radius": None if boundary else float(filling.vertex_radius[v]),
                "point": filling.space.ids[point],
                "mass": None if boundary else float(measure.vertex_mass[v]),
            }
        )
    edges = [
        {
            "a": ugraph.vertex_id(int(a)),
            "b": ugraph.vertex_id(int(b)),
            "kind": EDGE_KINDS_BY_CODE[int(ugraph.edge_kind[e])].value,
            "level": int(ugraph.edge_level[e]),
            "rho_length": float(ugraph.rho_length[e]),
            "mass": float(measure.edge_mass[e]),
        }
        for e, (a, b) in enumerate(ugraph.edges)
    ]
    return {
        "params": {
            "alpha": params.alpha,
            "tau": params.tau,
            "n_min": params.n_min,
            "n_max": params.n_max,
            "beta": measure.beta,
        },
        "vertices": vertices,
        "edges": edges,
    }


def stats_payload(ugraph: UniformizedGraph, measure: LiftedMeasure) -> dict[str, Any]:
    filling = ugraph.filling
    degrees = filling_ops.degree_stats(filling)
    kinds = {kind.value: 0 for kind in EDGE_KINDS_BY_CODE}
    for code in ugraph.edge_kind:
        kinds[EDGE_KINDS_BY_CODE[int(code)].value] += 1
    return {
        "vertices": {
            "interior": ugraph.n_interior,
            "boundary": filling.space.size,
            "per_level": {str(n): int(vs.size) for n, vs in filling.level_vertices.items()},
        },
        "edges": kinds,
        "degree": {
            "max": degrees.max_degree,
            "per_level_max": {str(n): d for n, d in degrees.per_level_max.items()},
            "histogram": {str(d): c for d, c in degrees.histogram.items()},
        },
        "overlap": {str(n): c for n, c in filling_ops.overlap_counts(filling).items()},
        "level_mass": {
            str(n): level_mass(measure, ugraph, n) for n in filling.params.levels
        },
        "total_mass": measure.total,
    }


def write_graph_json(ugraph: UniformizedGraph, measure: LiftedMeasure, path: Path) -> Path:
    return write_json(graph_payload(ugraph, measure), path)


def write_stats(ugraph: UniformizedGraph, measure: LiftedMeasure, path: Path) -> Path:
    return write_json(stats_payload(ugraph, measure), path)


def write_graph_dot(ugraph: UniformizedGraph, path: Path) -> Path:
    """Undirected DOT with level as rank and rho-length as an edge label."""
    filling = ugraph.filling
    lines = ["graph filling {"]
    for v in range(ugraph.n_total):
        level = "inf" if ugraph.is_boundary(v) else str(int(filling.vertex_level[v]))
        lines.append(f'  "{ugraph.vertex_id(v)}" [level="{level}"];')
    for e, (a, b) in enumerate(ugraph.edges):
        kind = EDGE_KINDS_BY_CODE[int(ugraph.edge_kind[e])].value
        lines.append(
            f'  "{ugraph.vertex_id(int(a))}" -- "{ugraph.vertex_id(int(b))}"'
            f' [kind="{kind}", rho_length="{format12(ugraph.rho_length[e])}"];'
        )
    lines.append("}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
