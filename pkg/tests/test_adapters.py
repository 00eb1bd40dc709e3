import json
from pathlib import Path

import numpy as np
import pytest

from hyperfill.adapters.files.funcfile import (
    load_boundary_function,
    load_graph_function,
    save_boundary_function,
    save_graph_function,
)
from hyperfill.adapters.files.graphfile import (
    graph_payload,
    stats_payload,
    write_graph_dot,
)
from hyperfill.adapters.files.spacefile import (
    SpaceFileError,
    dist_path,
    load_space,
    save_space,
)
from hyperfill.domain.models import BoundaryFunction, FillingParams, GraphFunction
from hyperfill.services import filling as filling_ops
from hyperfill.services import space as space_ops
from hyperfill.services.measure import lift_measure
from hyperfill.services.uniformize import uniformize


def _pair_graph():
    space = space_ops.euclidean_space(["a", "b"], np.array([[0.0], [1.0]]), [0.15, 0.25])
    params = FillingParams(alpha=2.0, tau=4.0, n_min=1, n_max=1)
    ugraph = uniformize(filling_ops.build(space, params))
    return space, ugraph, lift_measure(ugraph, space, 1.0)


def test_space_csv_with_coordinates_reloads_exactly(tmp_path: Path) -> None:
    space = space_ops.interval_grid(9)
    path = save_space(space, tmp_path / "grid.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "id,x,weight"
    assert not dist_path(path).exists()
    loaded = load_space(path)
    assert loaded.ids == space.ids
    assert np.array_equal(loaded.dist, space.dist)
    assert np.array_equal(loaded.weights, space.weights)


def test_abstract_space_csv_writes_a_distance_companion(tmp_path: Path) -> None:
    dist = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    space = space_ops.make_space(["p", "q", "r"], dist, [0.2, 0.3, 0.5])
    path = save_space(space, tmp_path / "tri.csv")
    assert dist_path(path).name == "tri.dist.csv"
    loaded = load_space(path)
    assert np.array_equal(loaded.dist, dist)
    assert loaded.coords is None


def test_shared_distance_file_is_a_fallback(tmp_path: Path) -> None:
    (tmp_path / "points.csv").write_text("id,weight\nu,1\nv,1\n", encoding="utf-8")
    (tmp_path / "dist.csv").write_text("0,2\n2,0\n", encoding="utf-8")
    loaded = load_space(tmp_path / "points.csv")
    assert loaded.dist[0, 1] == 2.0


def test_space_json_round_trip(tmp_path: Path) -> None:
    space = space_ops.cantor(2)
    loaded = load_space(save_space(space, tmp_path / "cantor.json"))
    assert loaded.ids == space.ids
    assert np.allclose(loaded.dist, space.dist)
    assert loaded.coords is None


def test_space_file_errors(tmp_path: Path) -> None:
    with pytest.raises(SpaceFileError, match="not found"):
        load_space(tmp_path / "missing.csv")
    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("name,weight\na,1\n", encoding="utf-8")
    with pytest.raises(SpaceFileError, match="header"):
        load_space(bad_header)
    lonely = tmp_path / "lonely.csv"
    lonely.write_text("id,weight\na,1\nb,1\n", encoding="utf-8")
    with pytest.raises(SpaceFileError, match="no distance file"):
        load_space(lonely)
    with pytest.raises(SpaceFileError, match="Cannot infer"):
        load_space(_touch(tmp_path / "points.txt"))
    text = tmp_path / "text.csv"
    text.write_text("id,x,weight\na,zero,1\n", encoding="utf-8")
    with pytest.raises(SpaceFileError, match="non-numeric"):
        load_space(text)


def _touch(path: Path) -> Path:
    path.write_text("", encoding="utf-8")
    return path


def test_boundary_function_files_are_keyed_by_id(tmp_path: Path) -> None:
    space = space_ops.interval_grid(3)
    path = tmp_path / "f.csv"
    path.write_text("id,value\n2,0.5\n0,1\n1,-1\n", encoding="utf-8")
    f = load_boundary_function(path, space)
    assert f.values.tolist() == [1.0, -1.0, 0.5]
    assert f.name == "f"
    saved = save_boundary_function(BoundaryFunction(f.values), space, tmp_path / "g.json")
    assert json.loads(saved.read_text(encoding="utf-8")) == {
        "boundary_values": {"0": 1.0, "1": -1.0, "2": 0.5}
    }
    assert load_boundary_function(saved, space).values.tolist() == [1.0, -1.0, 0.5]


def test_function_file_id_mismatches(tmp_path: Path) -> None:
    space = space_ops.interval_grid(3)
    short = tmp_path / "short.csv"
    short.write_text("id,value\n0,1\n", encoding="utf-8")
    with pytest.raises(SpaceFileError, match="missing 2 ids"):
        load_boundary_function(short, space)
    extra = tmp_path / "extra.csv"
    extra.write_text("id,value\n0,1\n1,1\n2,1\n9,1\n", encoding="utf-8")
    with pytest.raises(SpaceFileError, match="unknown ids"):
        load_boundary_function(extra, space)
    with pytest.raises(SpaceFileError, match="Function file not found"):
        load_boundary_function(tmp_path / "none.csv", space)


def test_graph_function_files_use_vertex_ids(tmp_path: Path) -> None:
    _, ugraph, _ = _pair_graph()
    assert ugraph.vertex_ids == ("a@1", "b@1", "a@inf", "b@inf")
    u = GraphFunction(np.array([0.25, 0.75, 0.0, 1.0]))
    path = save_graph_function(u, ugraph, tmp_path / "u.csv")
    assert load_graph_function(path, ugraph).values.tolist() == [0.25, 0.75, 0.0, 1.0]


def test_graph_payload_and_stats() -> None:
    _, ugraph, lifted = _pair_graph()
    payload = graph_payload(ugraph, lifted)
    assert payload["params"]["n_min"] == 1
    assert [v["level"] for v in payload["vertices"]] == [1, 1, None, None]
    kinds = sorted(edge["kind"] for edge in payload["edges"])
    assert kinds == ["horizontal", "tail", "tail"]
    stats = stats_payload(ugraph, lifted)
    assert stats["vertices"]["interior"] == 2
    assert stats["vertices"]["boundary"] == 2
    assert stats["edges"] == {"horizontal": 1, "vertical": 0, "tail": 2}
    assert stats["total_mass"] == pytest.approx(lifted.total)


def test_graph_payload_vertices_carry_center_and_ball_radius() -> None:
    _, ugraph, lifted = _pair_graph()
    vertices = graph_payload(ugraph, lifted)["vertices"]
    for vertex in vertices:
        assert {"id", "level", "center", "ball_radius"} <= set(vertex)
    assert [v["center"] for v in vertices] == ["a", "b", "a", "b"]
    # tau * alpha^-level with tau=4, alpha=2, level 1
    assert [v["ball_radius"] for v in vertices] == [2.0, 2.0, None, None]


def test_graph_dot_lists_every_edge(tmp_path: Path) -> None:
    _, ugraph, _ = _pair_graph()
    text = write_graph_dot(ugraph, tmp_path / "graph.dot").read_text(encoding="utf-8")
    assert text.startswith("graph filling {")
    assert text.count(" -- ") == 3
    assert '"a@1" -- "b@1" [kind="horizontal", rho_length="0.5"];' in text
