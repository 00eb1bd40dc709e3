from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from hyperfill.domain.kinds import SpaceFormat
from hyperfill.domain.models import PointCloudSpace
from hyperfill.services.space import euclidean_space, make_space

DIST_SUFFIX = ".dist.csv"
SHARED_DIST_NAME = "dist.csv"
COORD_NAMES = ("x", "y", "z")


class SpaceFileError(RuntimeError):
    pass


def space_format(path: Path, fmt: SpaceFormat | str | None = None) -> SpaceFormat:
    if fmt is not None:
        try:
            return SpaceFormat(fmt)
        except ValueError as exc:
            raise SpaceFileError(f"Unknown space format: {fmt}") from exc
    suffix = path.suffix.lower().lstrip(".")
    if suffix not in {item.value for item in SpaceFormat}:
        raise SpaceFileError(f"Cannot infer space format from {path}; use .csv or .json.")
    return SpaceFormat(suffix)


def load_space(path: Path, fmt: SpaceFormat | str | None = None) -> PointCloudSpace:
    if not path.exists():
        raise SpaceFileError(f"Space file not found: {path}")
    if space_format(path, fmt) is SpaceFormat.JSON:
        return _load_json(path)
    return _load_csv(path)


def save_space(space: PointCloudSpace, path: Path, fmt: SpaceFormat | str | None = None) -> Path:
    """CSV keeps coordinates inline when the space has them, else writes <stem>.dist.csv."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if space_format(path, fmt) is SpaceFormat.JSON:
        payload = {
            "points": [
                {"id": point_id, "weight": float(w)}
                for point_id, w in zip(space.ids, space.weights, strict=True)
            ],
            "dist": [[float(d) for d in row] for row in space.dist],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return path

    coords = space.coords
    names = _coord_names(0 if coords is None else coords.shape[1])
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", *names, "weight"])
        for k, point_id in enumerate(space.ids):
            row = [] if coords is None else [_exact(c) for c in coords[k]]
            writer.writerow([point_id, *row, _exact(space.weights[k])])
    if coords is None:
        with dist_path(path).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for row in space.dist:
                writer.writerow([_exact(d) for d in row])
    return path


def _exact(value: float) -> str:
    return repr(float(value))


def dist_path(path: Path) -> Path:
    return path.with_name(path.stem + DIST_SUFFIX)


def _coord_names(count: int) -> list[str]:
    if count <= len(COORD_NAMES):
        return list(COORD_NAMES[:count])
    return [f"x{k}" for k in range(count)]


def _load_csv(path: Path) -> PointCloudSpace:
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise SpaceFileError(f"Space file is empty: {path}")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0] != "id" or header[-1] != "weight":
        raise SpaceFileError(f"Space CSV header must be id[,x,y,...],weight: {path}")
    body = [row for row in rows[1:] if any(cell.strip() for cell in row)]
    if not body:
        raise SpaceFileError(f"Space file has no points: {path}")
    ids, coords, weights = [], [], []
    for line, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SpaceFileError(f"{path}:{line} has {len(row)} columns, expected {len(header)}.")
        ids.append(row[0].strip())
        coords.append([_float(cell, path, line) for cell in row[1:-1]])
        weights.append(_float(row[-1], path, line))
    if len(header) > 2:
        return euclidean_space(ids, np.array(coords, dtype=float), weights)
    return make_space(ids, _load_dist(path, len(ids)), weights)


def _load_dist(path: Path, size: int) -> np.ndarray:
    candidates = [dist_path(path), path.with_name(SHARED_DIST_NAME)]
    found = next((candidate for candidate in candidates if candidate.exists()), None)
    if found is None:
        raise SpaceFileError(
            f"Space CSV {path} has no coordinates and no distance file "
            f"({candidates[0].name} or {SHARED_DIST_NAME})."
        )
    with found.open(newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    matrix = [[_float(cell, found, line) for cell in row] for line, row in enumerate(rows, 1)]
    if len(matrix) != size or any(len(row) != size for row in matrix):
        raise SpaceFileError(f"Distance file {found} must be a {size}x{size} matrix.")
    return np.array(matrix, dtype=float)


def _load_json(path: Path) -> PointCloudSpace:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpaceFileError(f"Space file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "points" not in data or "dist" not in data:
        raise SpaceFileError(f"Space JSON must have points and dist: {path}")
    points = data["points"]
    if not isinstance(points, list) or not points:
        raise SpaceFileError(f"Space JSON points must be a non-empty list: {path}")
    try:
        ids = [str(point["id"]) for point in points]
        weights = [float(point["weight"]) for point in points]
        dist = np.array(data["dist"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpaceFileError(f"Space JSON {path} is malformed: {exc}") from exc
    return make_space(ids, dist, weights)


def _float(cell: str, path: Path, line: int) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise SpaceFileError(f"{path}:{line} has a non-numeric value {cell!r}.") from exc
