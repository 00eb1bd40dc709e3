import math

import numpy as np
import pytest

from hyperfill.domain.models import BesovParams, ExponentEstimates
from hyperfill.domain.rules import HypothesisError, ValidationError
from hyperfill.services import filling as filling_ops
from hyperfill.services import inequalities
from hyperfill.services import space as space_ops
from hyperfill.services.corpus import build_corpus, graph_corpus
from hyperfill.services.measure import lift_measure
from hyperfill.services.traceext import build_partitions
from hyperfill.services.uniformize import uniformize


def _pipeline(n: int = 16, besov: BesovParams | None = None):
    besov = besov or BesovParams(2.0, 0.5)
    space = space_ops.interval_grid(n)
    graph = filling_ops.build(space, filling_ops.resolve_params(space))
    ugraph = uniformize(graph)
    measure = lift_measure(ugraph, space, besov.beta)
    corpus = build_corpus(space, graph.net, besov.theta, seed=5, size=5)
    return space, graph, ugraph, measure, corpus, besov


BALLS = [(z, 2.0**-k) for z in (0, 8, 15) for k in (1, 2, 3)]


def test_ratio_handles_vanishing_sides() -> None:
    assert inequalities.ratio(0.0, 0.0) == 0.0
    assert inequalities.ratio(1.0, 0.0) == math.inf
    assert inequalities.ratio(1.0, 4.0) == 0.25


def test_poincare_trace_table_has_a_row_per_function_and_hull() -> None:
    space, graph, ugraph, measure, corpus, besov = _pipeline()
    functions = graph_corpus(space, ugraph, corpus)
    table = inequalities.check_poincare_trace(
        space, ugraph, measure, functions, BALLS, build_partitions(graph), besov.p
    )
    assert table.name == "poincare_trace"
    assert table.rows
    assert len(table.rows) % len(functions) == 0
    constant_rows = [row for row in table.rows if row.param1 == "Pconstant"]
    assert constant_rows
    assert all(row.lhs == 0.0 and row.ratio == 0.0 for row in constant_rows)
    assert math.isfinite(table.summary.max)


def test_extension_poincare_is_bounded_for_the_corpus() -> None:
    space, _, ugraph, measure, corpus, besov = _pipeline()
    table = inequalities.check_extension_poincare(
        space, ugraph, measure, corpus.functions, BALLS, besov.p, enlargement=4.0
    )
    assert table.rows
    assert table.notes == ("enlargement C = 4",)
    assert math.isfinite(table.summary.max)
    assert table.rows[0].param2 == "0@0.5"


def test_holder_refuses_p_at_or_below_q_beta() -> None:
    space, _, ugraph, measure, corpus, besov = _pipeline()
    with pytest.raises(HypothesisError, match="p > Q_beta"):
        inequalities.check_holder(
            space, ugraph, measure, corpus.functions, besov, 1.0, BALLS
        )


def test_holder_rows_compare_pairs_inside_each_ball() -> None:
    besov = BesovParams(4.0, 0.5)
    space, _, ugraph, measure, corpus, _ = _pipeline(besov=besov)
    table = inequalities.check_holder(
        space, ugraph, measure, corpus.functions, besov, 1.0, BALLS
    )
    assert table.notes == ("Q_beta = 3",)
    assert table.rows
    assert all(":" in row.param2 for row in table.rows)
    assert math.isfinite(table.summary.max)


def test_sobolev_qstar_needs_usable_exponents() -> None:
    space, _, ugraph, measure, corpus, besov = _pipeline()
    args = (space, ugraph, measure, corpus.functions, besov)
    with pytest.raises(HypothesisError, match="exponent estimates"):
        inequalities.check_sobolev_qstar(*args, None, BALLS)
    flat = ExponentEstimates(c_nu=2.0, q=1.0, c_low=1.0, eta=0.0, c_rev=1.0)
    with pytest.raises(HypothesisError, match="reverse doubling"):
        inequalities.check_sobolev_qstar(*args, flat, BALLS)
    low = ExponentEstimates(c_nu=2.0, q=1.0, c_low=1.0, eta=1.0, c_rev=1.0)
    with pytest.raises(HypothesisError, match="p\\*theta < Q"):
        inequalities.check_sobolev_qstar(*args, low, BALLS)


def test_sobolev_qstar_table_when_hypotheses_hold() -> None:
    besov = BesovParams(1.5, 0.5)
    space, _, ugraph, measure, corpus, _ = _pipeline(besov=besov)
    estimates = ExponentEstimates(c_nu=2.0, q=1.0, c_low=1.0, eta=1.0, c_rev=1.0)
    table = inequalities.check_sobolev_qstar(
        space, ugraph, measure, corpus.functions, besov, estimates, BALLS
    )
    assert table.notes == ("Q* = 6",)
    assert math.isfinite(table.summary.max)


def test_theta_q_is_positive_and_validates_inputs() -> None:
    space = space_ops.interval_grid(16)
    besov = BesovParams(2.0, 0.5)
    value = inequalities.compute_theta_q(space, besov, 4.0, (8, 0.25), 2.0)
    assert 0.0 < value < math.inf
    with pytest.raises(ValidationError, match="q must exceed p"):
        inequalities.compute_theta_q(space, besov, 2.0, (8, 0.25), 2.0)
    with pytest.raises(ValidationError, match="r must be positive"):
        inequalities.compute_theta_q(space, besov, 4.0, (8, 0.0), 2.0)


def test_theta_q_of_a_single_point_ball() -> None:
    # s^(1 - beta/p) nu(B)^(1/q - 1/p) peaks at the largest scale inside the ball
    space = space_ops.make_space(["x"], np.zeros((1, 1)), [1.0])
    besov = BesovParams(2.0, 0.5)
    assert inequalities.compute_theta_q(space, besov, 4.0, (0, 1.0), 2.0) == pytest.approx(1.0)


def test_ball_label_uses_point_id_and_radius() -> None:
    space = space_ops.interval_grid(4)
    assert inequalities.ball_label(space, 2, 0.125) == "2@0.125"
