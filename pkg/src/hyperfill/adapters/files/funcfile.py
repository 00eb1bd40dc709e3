"""Function files: CSV with an id,value header, or JSON {boundary_values|vertex_values: {id: v}}.

Boundary functions are keyed by point id, graph functions by vertex id (`<point>@<level>` for
interior vertices, `<point>@inf` for boundary vertices).
"""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from hyperfill.adapters.files.spacefile import SpaceFileError
from hyperfill.domain.models import (
    BoundaryFunction,
    GraphFunction,
    PointCloudSpace,
    UniformizedGraph,
)
from hyperfill.services.utils import format12

BOUNDARY_KEY = "boundary_values"
VERTEX_KEY = "vertex_values"


def load_boundary_function(path: Path, space: PointCloudSpace) -> BoundaryFunction:
    values = _ordered(_read_values(path, BOUNDARY_KEY), space.ids, path)
    return BoundaryFunction(values, name=path.stem)


def load_graph_function(path: Path, ugraph: UniformizedGraph) -> GraphFunction:
    values = _ordered(_read_values(path, VERTEX_KEY), ugraph.vertex_ids, path)
    return GraphFunction(values, name=path.stem)


def save_boundary_function(f: BoundaryFunction, space: PointCloudSpace, path: Path) -> Path:
    return _write_values(path, BOUNDARY_KEY, space.ids, f.values)


def save_graph_function(u: GraphFunction, ugraph: UniformizedGraph, path: Path) -> Path:
    return _write_values(path, VERTEX_KEY, ugraph.vertex_ids, u.values)


def _read_values(path: Path, key: str) -> dict[str, float]:
    if not path.exists():
        raise SpaceFileError(f"Function file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SpaceFileError(f"Function file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict) or not isinstance(data.get(key), dict):
            raise SpaceFileError(f"Function JSON {path} must map {key} to an object.")
        try:
            return {str(k): float(v) for k, v in data[key].items()}
        except (TypeError, ValueError) as exc:
            raise SpaceFileError(f"Function JSON {path} has a non-numeric value.") from exc

    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or {"id", "value"} - set(reader.fieldnames):
            raise SpaceFileError(f"Function CSV header must be id,value: {path}")
        values: dict[str, float] = {}
        for line, row in enumerate(reader, start=2):
            try:
                values[row["id"].strip()] = float(row["value"])
            except (AttributeError, TypeError, ValueError) as exc:
                raise SpaceFileError(f"{path}:{line} has a non-numeric value.") from exc
    return values


def _ordered(values: dict[str, float], ids: Sequence[str], path: Path) -> np.ndarray:
    missing = [point_id for point_id in ids if point_id not in values]
    if missing:
        preview = ", ".join(missing[:5])
        raise SpaceFileError(f"Function file {path} is missing {len(missing)} ids ({preview}).")
    extra = set(values) - set(ids)
    if extra:
        preview = ", ".join(sorted(extra)[:5])
        raise SpaceFileError(f"Function file {path} has unknown ids ({preview}).")
    return np.array([values[point_id] for point_id in ids], dtype=float)


def _write_values(path: Path, key: str, ids: Sequence[str], values: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".json":
        pairs = zip(ids, values, strict=True)
        payload = {key: {point_id: float(format12(v)) for point_id, v in pairs}}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return path
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "value"])
        for point_id, value in zip(ids, values, strict=True):
            writer.writerow([point_id, format12(value)])
    return path
