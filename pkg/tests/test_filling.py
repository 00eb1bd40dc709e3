import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfill.domain.models import HORIZONTAL, VERTICAL, FillingParams
from hyperfill.domain.rules import ValidationError
from hyperfill.services import filling as filling_ops
from hyperfill.services import space as space_ops


def _line(*points: float):
    coords = np.array(points, dtype=float)[:, None]
    ids = [str(k) for k in range(len(points))]
    return space_ops.euclidean_space(ids, coords, np.ones(len(points)))


def _grid_filling(n: int = 16):
    space = space_ops.interval_grid(n)
    return filling_ops.build(space, filling_ops.resolve_params(space))


def test_greedy_net_skips_points_inside_radius() -> None:
    space = _line(0.0, 0.4, 1.0)
    net = filling_ops.build_nets(space, FillingParams(alpha=2.0, tau=4.0, n_min=1, n_max=1))
    assert net.centers[1] == (0, 2)


def test_net_order_compares_numeric_ids_as_numbers() -> None:
    dist = np.ones((3, 3)) - np.eye(3)
    space = space_ops.make_space(["10", "2", "b"], dist, [1.0, 1.0, 1.0])
    assert [space.ids[i] for i in filling_ops.net_order(space)] == ["2", "10", "b"]


def test_fine_levels_take_every_point_and_coarse_levels_one() -> None:
    space = space_ops.interval_grid(16)
    params = filling_ops.resolve_params(space)
    net = filling_ops.build_nets(space, params)
    assert net.centers[params.n_max] == tuple(range(16))
    assert net.centers[params.n_min] == (0,)
    assert params.scale(params.n_min) > space.diameter
    assert filling_ops.check_nets(space, net) == []


def test_resolve_params_defaults_and_validation() -> None:
    params = filling_ops.resolve_params(space_ops.interval_grid(16))
    # diameter 1 and spacing 1/15
    assert params.n_min == -1
    assert params.n_max == 4 + filling_ops.LEVELS_PAST_SATURATION
    bound = r"tau must satisfy tau > max\{3, alpha/\(alpha-1\)\}"
    with pytest.raises(ValidationError, match=bound):
        filling_ops.resolve_params(space_ops.interval_grid(4), alpha=2.0, tau=2.0)
    with pytest.raises(ValidationError, match="alpha must be > 1"):
        filling_ops.resolve_params(space_ops.interval_grid(4), alpha=1.0)


def test_two_points_at_unit_distance_share_a_horizontal_edge() -> None:
    space = _line(0.0, 1.0)
    graph = filling_ops.build(space, FillingParams(alpha=2.0, tau=4.0, n_min=0, n_max=0))
    assert graph.n_vertices == 2
    assert graph.edges.tolist() == [[0, 1]]
    assert graph.edge_kind.tolist() == [HORIZONTAL]


def test_single_point_is_a_vertical_chain() -> None:
    space = space_ops.make_space(["only"], np.zeros((1, 1)), [1.0])
    params = filling_ops.resolve_params(space)
    graph = filling_ops.build(space, params)
    assert list(params.levels) == [0, 1, 2]
    assert graph.n_vertices == 3
    assert set(graph.edge_kind.tolist()) == {VERTICAL}
    assert filling_ops.degree_stats(graph).max_degree == 2
    assert filling_ops.vertical_geodesic(graph, 0, 0, 2) == [0, 1, 2]


def test_filling_invariants_hold_on_grid_and_cantor() -> None:
    for space in (space_ops.interval_grid(16), space_ops.cantor(3)):
        graph = filling_ops.build(space, filling_ops.resolve_params(space))
        assert filling_ops.check_nets(space, graph.net) == []
        assert filling_ops.check_edges(graph) == []
        assert filling_ops.upward_neighbor_problems(graph) == []
        assert filling_ops.large_inclusion_violations(graph) == []


def test_vertex_ids_use_point_and_level() -> None:
    graph = _grid_filling()
    top = graph.level_vertices[graph.params.n_max]
    assert graph.vertex_id(int(top[3])) == f"3@{graph.params.n_max}"


def test_vertical_geodesic_is_anchored_and_adjacent() -> None:
    graph = _grid_filling()
    z = 7
    path = filling_ops.vertical_geodesic(graph, z, 0, 3)
    assert len(path) == 4
    for k, v in zip(range(0, 4), path, strict=True):
        assert graph.vertex_level[v] == k
        assert graph.space.dist[graph.vertex_center[v], z] < graph.params.scale(k)
    for v, w in zip(path, path[1:], strict=False):
        assert graph.graph.has_edge(v, w)
    with pytest.raises(ValidationError):
        filling_ops.vertical_geodesic(graph, z, 3, 0)


def test_net_center_geodesic_passes_through_its_own_vertices() -> None:
    graph = _grid_filling()
    params = graph.params
    path = filling_ops.vertical_geodesic(graph, 0, params.n_min, params.n_max)
    assert all(graph.vertex_center[v] == 0 for v in path)


def test_hull_of_whole_space_takes_every_fine_enough_vertex() -> None:
    graph = _grid_filling()
    hull = filling_ops.hull(graph, 0, 1.5)
    expected = np.flatnonzero(graph.vertex_level >= 0)
    assert hull.vertices.tolist() == expected.tolist()


def test_hull_below_finest_scale_is_empty() -> None:
    graph = _grid_filling()
    hull = filling_ops.hull(graph, 0, 0.5 * graph.params.scale(graph.params.n_max))
    assert hull.is_empty
    with pytest.raises(ValidationError):
        filling_ops.hull(graph, 0, 0.0)


def test_hull_vertices_match_exhaustive_witness_search() -> None:
    graph = _grid_filling()
    space = graph.space
    r = 0.25
    hull = filling_ops.hull(graph, 0, r)
    in_ball = space.dist[0] < r
    expected = [
        v
        for v in range(graph.n_vertices)
        if graph.params.scale(int(graph.vertex_level[v])) <= r
        and any(graph.membership[v, y] and in_ball[y] for y in range(space.size))
    ]
    assert hull.vertices.tolist() == expected
    assert set(graph.vertex_level[hull.vertices].tolist()) <= set(range(2, graph.params.n_max + 1))


def test_degree_does_not_grow_under_refinement() -> None:
    coarse = filling_ops.degree_stats(_grid_filling(32))
    fine = filling_ops.degree_stats(_grid_filling(64))
    assert fine.max_degree <= 1.5 * coarse.max_degree
    assert sum(fine.histogram.values()) == len(_grid_filling(64).vertex_level)


def test_bulk_levels_run_from_sub_diameter_balls_to_saturation() -> None:
    assert filling_ops.bulk_levels(_grid_filling(64)) == range(3, 7)
    assert filling_ops.bulk_levels(_grid_filling(16)) == range(3, 5)
    cantor = space_ops.cantor(5)
    graph = filling_ops.build(cantor, filling_ops.resolve_params(cantor))
    assert filling_ops.bulk_levels(graph) == range(3, 9)


def test_bulk_levels_stay_inside_the_level_range() -> None:
    space = _line(0.0, 1.0)
    graph = filling_ops.build(space, FillingParams(alpha=2.0, tau=4.0, n_min=5, n_max=6))
    assert filling_ops.bulk_levels(graph) == range(5, 6)
    single = _line(0.0)
    graph = filling_ops.build(single, filling_ops.resolve_params(single))
    assert filling_ops.bulk_levels(graph) == graph.params.levels


def test_overlap_counts_are_positive_on_every_level() -> None:
    graph = _grid_filling()
    counts = filling_ops.overlap_counts(graph)
    assert set(counts) == set(graph.params.levels)
    assert all(count >= 1 for count in counts.values())
    assert filling_ops.hull_overlap(graph, graph.params.n_max) >= 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=500), min_size=2, max_size=10, unique=True))
def test_random_line_subsets_build_valid_fillings(ticks: list[int]) -> None:
    space = _line(*(t / 500.0 for t in sorted(ticks)))
    graph = filling_ops.build(space, filling_ops.resolve_params(space))
    assert filling_ops.check_nets(space, graph.net) == []
    assert filling_ops.check_edges(graph) == []
    assert filling_ops.upward_neighbor_problems(graph) == []
