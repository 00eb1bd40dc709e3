import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfill.domain.models import BoundaryFunction, FillingParams, GraphFunction
from hyperfill.domain.rules import ValidationError
from hyperfill.services import filling as filling_ops
from hyperfill.services import funcspace, traceext
from hyperfill.services import space as space_ops
from hyperfill.services.measure import lift_measure
from hyperfill.services.uniformize import uniformize


def _setup(space, params=None):
    params = params or filling_ops.resolve_params(space)
    graph = filling_ops.build(space, params)
    ugraph = uniformize(graph)
    return ugraph, traceext.build_partitions(graph)


def _pair(weights=(1.0, 1.0)):
    return space_ops.euclidean_space(["a", "b"], np.array([[0.0], [1.0]]), list(weights))


def _wave(space) -> BoundaryFunction:
    return BoundaryFunction(np.sin(3.0 * space.coords[:, 0]), "wave")


def test_trace_of_constant_is_constant_at_every_level() -> None:
    ugraph, partitions = _setup(space_ops.interval_grid(16))
    result = traceext.trace(ugraph, partitions, GraphFunction(np.full(ugraph.n_total, 2.5)))
    for n in result.levels:
        assert np.allclose(result.partial[n], 2.5)
    assert all(step == pytest.approx(0.0, abs=1e-12) for step in result.step_decay)


def test_trace_of_vertex_indicator_is_its_bump() -> None:
    ugraph, partitions = _setup(space_ops.interval_grid(16))
    n = 2
    row = 1
    v = int(ugraph.filling.level_vertices[n][row])
    values = np.zeros(ugraph.n_total)
    values[v] = 1.0
    result = traceext.trace(ugraph, partitions, GraphFunction(values), levels=[n])
    assert np.allclose(result.partial[n], partitions[n].matrix[row])


def test_trace_rejects_bad_inputs() -> None:
    ugraph, partitions = _setup(space_ops.interval_grid(8))
    with pytest.raises(ValidationError, match="graph function must have"):
        traceext.trace(ugraph, partitions, GraphFunction(np.zeros(3)))
    top = ugraph.filling.params.n_max
    with pytest.raises(ValidationError, match="outside"):
        traceext.trace(
            ugraph, partitions, GraphFunction(np.zeros(ugraph.n_total)), levels=[top + 1]
        )


def test_poisson_extension_of_constant_is_constant() -> None:
    space = space_ops.cantor(3)
    ugraph, _ = _setup(space)
    ext = traceext.poisson_extension(space, ugraph, BoundaryFunction(np.full(space.size, -4.0)))
    assert np.allclose(ext.pf.values, -4.0)


def test_poisson_extension_averages_over_the_vertex_ball() -> None:
    space = _pair()
    ugraph, _ = _setup(space, FillingParams(alpha=2.0, tau=4.0, n_min=1, n_max=1))
    ext = traceext.poisson_extension(space, ugraph, BoundaryFunction(np.array([0.0, 1.0])))
    assert ext.pf.values[: ugraph.n_interior].tolist() == [0.5, 0.5]
    assert ext.pf.values[ugraph.n_interior :].tolist() == [0.0, 1.0]


def test_truncated_extension_cutoffs() -> None:
    space = space_ops.interval_grid(16)
    ugraph, _ = _setup(space)
    params = ugraph.filling.params
    f = _wave(space)
    ext = traceext.poisson_extension(space, ugraph, f)
    below = traceext.truncate_extension(ext, params.n_min - 3)
    assert np.allclose(below.values, ext.pf.values)
    top = traceext.truncate_extension(ext, params.n_max)
    assert np.all(top.values[: ugraph.n_interior] == 0.0)
    assert np.allclose(top.values[ugraph.n_interior :], f.values)
    middle = traceext.truncate_extension(ext, 1)
    levels = ugraph.filling.vertex_level
    inner = middle.values[: ugraph.n_interior]
    assert np.all(inner[levels <= 1] == 0.0)
    assert np.allclose(inner[levels > 1], ext.pf.values[: ugraph.n_interior][levels > 1])


def test_trace_recovers_the_boundary_function() -> None:
    space = space_ops.interval_grid(16)
    ugraph, partitions = _setup(space)
    f = _wave(space)
    poisson = traceext.poisson_extension(space, ugraph, f).pf
    assert np.allclose(traceext.trace(ugraph, partitions, poisson).trace, f.values)
    lipschitz = traceext.lipschitz_extension(space, ugraph, f)
    assert np.allclose(traceext.trace(ugraph, partitions, lipschitz).trace, f.values)


def test_partial_traces_converge_to_the_trace() -> None:
    space = space_ops.interval_grid(32)
    ugraph, partitions = _setup(space)
    pf = traceext.poisson_extension(space, ugraph, _wave(space)).pf
    result = traceext.trace(ugraph, partitions, pf)
    assert result.tail_decay[-1] == pytest.approx(0.0, abs=1e-12)
    assert result.tail_decay[0] > result.tail_decay[-2]


def test_restricted_lp_norm_shrinks_toward_the_boundary() -> None:
    space = space_ops.interval_grid(16)
    ugraph, _ = _setup(space)
    lifted = lift_measure(ugraph, space, 1.0)
    u = traceext.poisson_extension(space, ugraph, _wave(space)).pf
    params = ugraph.filling.params
    norms = [traceext.restricted_lp_norm(ugraph, lifted, u, n, 2.0) for n in params.levels]
    assert all(a >= b for a, b in zip(norms, norms[1:], strict=False))
    assert norms[0] == pytest.approx(funcspace.lp_norm_graph(ugraph, lifted, u, 2.0))


def test_hajlasz_gradients_vanish_for_zero_edge_function() -> None:
    space = space_ops.interval_grid(8)
    ugraph, _ = _setup(space)
    gradients = traceext.hajlasz_gradients(ugraph, np.zeros(len(ugraph.edges)), 0.5)
    assert set(gradients) == set(ugraph.filling.params.levels)
    assert all(np.all(g.values == 0.0) for g in gradients.values())
    with pytest.raises(ValidationError, match="nonnegative"):
        traceext.hajlasz_gradients(ugraph, -np.ones(len(ugraph.edges)), 0.5)


def test_hajlasz_violations_flag_a_jump_without_gradient() -> None:
    space = _pair()
    ugraph, _ = _setup(space)
    gradients = traceext.hajlasz_gradients(ugraph, np.zeros(len(ugraph.edges)), 0.5)
    constant, tested = traceext.hajlasz_violations(
        space, BoundaryFunction(np.ones(2)), gradients, 0.5, 2.0
    )
    assert constant == []
    assert tested >= 1
    jump, _ = traceext.hajlasz_violations(
        space, BoundaryFunction(np.array([0.0, 1.0])), gradients, 0.5, 2.0
    )
    assert [(v.x, v.y) for v in jump] == [("a", "b")]


def test_extension_gradient_is_an_upper_gradient() -> None:
    space = space_ops.interval_grid(8)
    ugraph, _ = _setup(space)
    f = _wave(space)
    pf = traceext.poisson_extension(space, ugraph, f).pf
    g = funcspace.edge_gradients(ugraph, pf)
    assert traceext.check_hyperbolic_upper_gradient(space, ugraph, f, g, path_budget=2) == []
    flat = traceext.check_hyperbolic_upper_gradient(space, ugraph, f, np.zeros_like(g))
    assert flat


def test_sample_pairs_is_deterministic_and_capped() -> None:
    assert traceext.sample_pairs(4, 10, seed=1) == [
        (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)
    ]
    first = traceext.sample_pairs(40, 12, seed=7)
    assert first == traceext.sample_pairs(40, 12, seed=7)
    assert len(first) == 12


GRID16 = space_ops.interval_grid(16)
GRID16_SETUP = _setup(GRID16)
GRID64 = space_ops.interval_grid(64)
GRID64_UGRAPH, _ = _setup(GRID64)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(min_value=-3.0, max_value=3.0))
def test_poisson_extension_and_trace_are_linear(seed: int, c: float) -> None:
    ugraph, partitions = GRID16_SETUP
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(2, GRID16.size))

    def extend(values: np.ndarray) -> np.ndarray:
        return traceext.poisson_extension(GRID16, ugraph, BoundaryFunction(values)).pf.values

    assert np.allclose(extend(f + c * g), extend(f) + c * extend(g), atol=1e-9)

    u, w = rng.normal(size=(2, ugraph.n_total))

    def partials(values: np.ndarray) -> dict[int, np.ndarray]:
        return traceext.trace(ugraph, partitions, GraphFunction(values)).partial

    combined, left, right = partials(u + c * w), partials(u), partials(w)
    for n, values in combined.items():
        assert np.allclose(values, left[n] + c * right[n], atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(min_value=0.1, max_value=0.9))
def test_extension_edge_gradients_are_hajlasz_gradients(seed: int, theta: float) -> None:
    rng = np.random.default_rng(seed)
    f = BoundaryFunction(rng.normal(size=GRID64.size))
    pf = traceext.poisson_extension(GRID64, GRID64_UGRAPH, f).pf
    g = funcspace.edge_gradients(GRID64_UGRAPH, pf)
    gradients = traceext.hajlasz_gradients(GRID64_UGRAPH, g, theta)
    violations, tested = traceext.hajlasz_violations(GRID64, f, gradients, theta, 2.0)
    assert tested > 0
    assert violations == []


def test_ensemble_tail_of_a_single_function_is_its_trace_tail() -> None:
    ugraph, partitions = GRID16_SETUP
    f = _wave(GRID16)
    pf = traceext.poisson_extension(GRID16, ugraph, f).pf
    levels = list(ugraph.filling.params.levels)
    for p in (1.0, 2.0, 3.5):
        expected = traceext.trace(ugraph, partitions, pf, levels, p).tail_decay
        tails = traceext.ensemble_tail(
            ugraph, partitions, np.outer(f.values, f.values), levels, p
        )
        assert tails == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_poisson_operator_rows_are_probability_weights() -> None:
    ugraph, _ = GRID16_SETUP
    op = traceext.poisson_operator(GRID16, ugraph)
    assert op.shape == (ugraph.n_interior, GRID16.size)
    assert np.allclose(op.sum(axis=1), 1.0)
    assert np.all(op >= 0.0)
