import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfill.domain.rules import MetricAxiomError, ValidationError
from hyperfill.services import space as space_ops
from hyperfill.services.fits import lower_decay_order


def _path_space(far: float = 2.0, weights: tuple[float, ...] = (1.0, 1.0, 1.0)):
    dist = np.array([[0.0, 1.0, far], [1.0, 0.0, 1.0], [far, 1.0, 0.0]])
    return space_ops.make_space(["0", "1", "2"], dist, weights)


def test_make_space_accepts_path_metric() -> None:
    space = _path_space()
    assert space.size == 3
    assert space.diameter == 2.0
    assert space.min_distance == 1.0
    assert space.total_mass == 3.0


def test_make_space_names_triangle_violation() -> None:
    with pytest.raises(MetricAxiomError) as excinfo:
        _path_space(far=5.0)
    assert excinfo.value.triple == ("0", "1", "2")
    assert "(0, 1, 2)" in str(excinfo.value)


def test_make_space_rejects_nonpositive_weight() -> None:
    with pytest.raises(ValidationError, match="weight of point 1 must be positive"):
        _path_space(weights=(1.0, 0.0, 1.0))


def test_make_space_rejects_asymmetric_and_duplicate_ids() -> None:
    dist = np.array([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(MetricAxiomError, match="symmetric"):
        space_ops.make_space(["a", "b"], dist, [1.0, 1.0])
    with pytest.raises(ValidationError, match="unique"):
        space_ops.make_space(["a", "a"], np.zeros((2, 2)), [1.0, 1.0])


def test_interval_grid_points_and_weights() -> None:
    space = space_ops.interval_grid(3)
    assert space.coords[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert np.allclose(space.weights, 1.0 / 3.0)


def test_snowflake_applies_power_pointwise() -> None:
    space = space_ops.generate_space("snowflake", {"n": 3, "eps": 0.5})
    assert space.dist[0, 2] == pytest.approx(1.0)
    assert space.dist[0, 1] == pytest.approx(math.sqrt(0.5))


def test_snowflake_rejects_exponent_above_one() -> None:
    with pytest.raises(ValidationError, match=r"eps must lie in \(0, 1\]"):
        space_ops.generate_space("snowflake", {"n": 8, "eps": 1.5})


def test_cantor_enumerates_interval_endpoints() -> None:
    level2 = space_ops.cantor(2)
    assert level2.size == 8
    expected = np.array([0, 1, 2, 3, 6, 7, 8, 9]) / 9.0
    assert np.allclose(level2.coords[:, 0], expected)
    assert space_ops.cantor(3).size == 16


def test_circle_uses_chordal_distance() -> None:
    space = space_ops.circle(4)
    radius = 1.0 / (2.0 * math.pi)
    assert space.dist[0, 2] == pytest.approx(2.0 * radius)
    assert space.dist[0, 1] == pytest.approx(math.sqrt(2.0) * radius)


def test_generate_space_accepts_dashed_kind() -> None:
    assert space_ops.generate_space("interval-grid", {"n": 5}).size == 5
    with pytest.raises(ValidationError):
        space_ops.generate_space("torus", {})


def test_refine_params_keeps_coarse_grid_inside() -> None:
    assert space_ops.refine_params("interval_grid", {"n": 16}) == {"n": 31}
    assert space_ops.refine_params("circle", {"n": 16}) == {"n": 32}
    assert space_ops.refine_params("cantor", {"level": 3}) == {"level": 4}
    coarse = space_ops.interval_grid(64)
    fine = space_ops.interval_grid(space_ops.refine_params("interval_grid", {"n": 64})["n"])
    assert fine.size == 127
    assert np.allclose(fine.coords[::2], coarse.coords)


def test_ball_is_open_and_contains_center() -> None:
    grid3 = space_ops.interval_grid(3)
    assert space_ops.ball(grid3, 1, 0.6).tolist() == [0, 1, 2]
    assert space_ops.ball(grid3, 0, 0.5).tolist() == [0]
    assert space_ops.ball(grid3, 0, 0.5, closed=True).tolist() == [0, 1]
    grid5 = space_ops.interval_grid(5)
    assert space_ops.ball(grid5, 2, 0.3).tolist() == [1, 2, 3]


def test_ball_rejects_unknown_point() -> None:
    with pytest.raises(ValidationError, match="unknown point"):
        space_ops.ball(space_ops.interval_grid(3), 7, 1.0)


def test_measure_sums_weights() -> None:
    assert space_ops.measure(_path_space(), [0, 1, 2]) == 3.0
    assert space_ops.measure(_path_space(), []) == 0.0
    pair = space_ops.make_space(["a", "b"], np.array([[0.0, 1.0], [1.0, 0.0]]), [0.2, 0.3])
    assert space_ops.measure(pair, [0, 1]) == pytest.approx(0.5)


def test_estimate_exponents_on_interval_grid() -> None:
    space = space_ops.interval_grid(64)
    estimates = space_ops.estimate_exponents(space, [2.0**-k for k in range(1, 6)])
    assert 0.8 <= estimates.q <= 1.2
    assert estimates.c_nu >= 1.0
    assert estimates.c_low >= 1.0


def test_lower_decay_order_with_free_intercept_ignores_a_constant_offset() -> None:
    x = np.array([-1.0, -2.0, -3.0])
    y = 2.0 * x - 1.0
    order, constant = lower_decay_order(x, y, anchored=False)
    assert order == pytest.approx(2.0)
    assert constant == pytest.approx(math.e)
    # through the origin the offset tilts the minimax line
    anchored, _ = lower_decay_order(x, y)
    assert anchored == pytest.approx(7.0 / 3.0)


def test_estimate_exponents_rejects_degenerate_inputs() -> None:
    single = space_ops.make_space(["x"], np.zeros((1, 1)), [1.0])
    with pytest.raises(ValidationError, match="degenerate"):
        space_ops.estimate_exponents(single, [0.5])
    with pytest.raises(ValidationError, match="degenerate"):
        space_ops.estimate_exponents(space_ops.interval_grid(16), [0.5, 0.25])


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=1000), min_size=2, max_size=12, unique=True),
    st.floats(min_value=0.2, max_value=1.0),
)
def test_snowflake_of_a_line_is_a_metric(ticks: list[int], eps: float) -> None:
    coords = np.array(ticks, dtype=float)[:, None] / 1000.0
    line = space_ops.euclidean_space([str(t) for t in ticks], coords, np.ones(len(ticks)))
    flake = space_ops.snowflake(line, eps)
    assert flake.size == line.size
    assert np.allclose(flake.dist, line.dist**eps)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=1000), min_size=2, max_size=10, unique=True),
    st.floats(min_value=0.2, max_value=1.0),
    st.floats(min_value=0.2, max_value=1.0),
)
def test_snowflakes_compose_by_multiplying_exponents(ticks: list[int], a: float, b: float) -> None:
    coords = np.array(ticks, dtype=float)[:, None] / 1000.0
    line = space_ops.euclidean_space([str(t) for t in ticks], coords, np.ones(len(ticks)))
    twice = space_ops.snowflake(space_ops.snowflake(line, a), b)
    once = space_ops.snowflake(line, a * b)
    assert np.allclose(twice.dist, once.dist, rtol=1e-12, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=0, max_value=15),
    st.floats(min_value=0.0, max_value=2.0),
    st.floats(min_value=0.0, max_value=2.0),
)
def test_ball_mass_grows_with_the_radius(z: int, r: float, s: float) -> None:
    space = space_ops.interval_grid(16)
    small, large = sorted((r, s))
    assert space_ops.ball_mass(space, z, small) <= space_ops.ball_mass(space, z, large)
