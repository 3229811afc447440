import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from deltasink.errors import DomainError, UnsupportedQueryError, ValidationError
from deltasink.model import (
    ConstantSink,
    DeltaAt,
    ExponentialSink,
    Gaussian,
    InverseTimeSink,
    LinearSink,
    Problem,
    SpaceGrid,
    TabulatedIC,
    TabulatedSink,
    TimeGrid,
    ZeroSink,
    evaluate_ic,
    evaluate_sink,
    problem_issues,
    validate_problem,
)


def test_sink_values():
    assert evaluate_sink(ConstantSink(1.0), 5.0) == 1.0
    assert evaluate_sink(LinearSink(2.0), 0.0) == 0.0
    assert evaluate_sink(ExponentialSink(3.0, 1.0), 0.0) == 3.0
    assert evaluate_sink(InverseTimeSink(2.0), 4.0) == 0.5
    assert evaluate_sink(ZeroSink(), 1.0) == 0.0


def test_sink_domain():
    with pytest.raises(DomainError):
        evaluate_sink(InverseTimeSink(1.0), 0.0)
    with pytest.raises(DomainError):
        evaluate_sink(ConstantSink(1.0), -1.0)
    with pytest.raises(DomainError):
        evaluate_sink(ConstantSink(1.0), math.nan)


def test_tabulated_sink_exact_at_knots_and_clamped():
    tab = TabulatedSink((0.0, 1.0, 3.0), (0.5, 2.0, 1.0))
    for t, k in zip(tab.times, tab.rates):
        assert evaluate_sink(tab, t) == k
    assert evaluate_sink(tab, 2.0) == pytest.approx(1.5)
    assert evaluate_sink(tab, 10.0) == 1.0


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(
        [ConstantSink(2.0), LinearSink(0.3), InverseTimeSink(1.5), ExponentialSink(1.0, 2.0), ZeroSink()]
    ),
    st.floats(min_value=1e-6, max_value=1e3),
)
def test_sinks_non_negative_and_deterministic(sink, t):
    a = evaluate_sink(sink, t)
    assert a >= 0 and a == evaluate_sink(sink, t)


def test_gaussian_density():
    g = Gaussian(0.0, 1.0)
    assert evaluate_ic(g, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert evaluate_ic(g, 3.0) == evaluate_ic(g, -3.0)


def test_delta_has_no_density():
    with pytest.raises(UnsupportedQueryError):
        evaluate_ic(DeltaAt(-1.0), 0.0)


def test_tabulated_ic_normalized():
    x = np.linspace(-2, 3, 37)
    ic = TabulatedIC(tuple(x), tuple(3.0 * np.exp(-x * x)))
    xs, rho = ic.arrays()
    assert trapezoid(rho, xs) == pytest.approx(1.0, abs=1e-12)
    assert evaluate_ic(ic, 10.0) == 0.0


@pytest.mark.parametrize(
    "x,rho",
    [((0.0, 1.0), (1.0,)), ((1.0, 0.0), (1.0, 1.0)), ((0.0, 1.0), (0.0, 0.0))],
)
def test_tabulated_ic_bad_input(x, rho):
    with pytest.raises(DomainError):
        TabulatedIC(x, rho)


def test_validate_examples():
    assert validate_problem(Problem(1.0, InverseTimeSink(1.0), DeltaAt(-1.0)))
    with pytest.raises(ValidationError) as exc:
        validate_problem(Problem(1.0, InverseTimeSink(1.0), DeltaAt(0.0)))
    assert exc.value.codes == ["IC_AT_ORIGIN"]
    with pytest.raises(ValidationError) as exc:
        validate_problem(Problem(-1.0, ZeroSink(), DeltaAt(-1.0)))
    assert "D_NONPOSITIVE" in exc.value.codes


def test_validate_reports_every_issue():
    p = Problem(math.nan, ConstantSink(-1.0), Gaussian(0.0, -1.0))
    codes = {i.code for i in problem_issues(p)}
    assert codes == {"D_NONFINITE", "SINK_NEGATIVE", "IC_WIDTH_NONPOSITIVE"}


def test_gaussian_origin_proxy_for_inverse_time():
    assert not problem_issues(Problem(1.0, InverseTimeSink(1.0), Gaussian(-4.0, 0.5)))
    assert problem_issues(Problem(1.0, InverseTimeSink(1.0), Gaussian(-3.9, 0.5)))


def test_tabulated_sink_issues():
    codes = {i.code for i in problem_issues(Problem(1.0, TabulatedSink((1.0, 0.5), (1.0, -1.0)), DeltaAt(1.0)))}
    assert codes == {"SINK_KNOTS_UNSORTED", "SINK_NEGATIVE"}


def test_validate_idempotent():
    p = Problem(2.0, ExponentialSink(1.0, 0.5), Gaussian(1.0, 0.2))
    assert validate_problem(validate_problem(p)) == p


def test_time_grid():
    g = TimeGrid(4.0, 8)
    assert g.h == 0.5 and g.nodes[-1] == 4.0 and g.index_of(1.5) == 3
    with pytest.raises(DomainError, match="nearest nodes are 1.0 and 1.5"):
        g.index_of(1.2)
    with pytest.raises(DomainError):
        TimeGrid(1.0, 1)


def test_space_grid():
    s = SpaceGrid(12.0, 4801)
    assert s.dx == pytest.approx(0.005)
    assert s.nodes[s.origin_index] == 0.0
    assert np.array_equal(s.nodes, -s.nodes[::-1])
    with pytest.raises(DomainError):
        SpaceGrid(1.0, 10)
    assert SpaceGrid.with_spacing(12.0, 0.01).n_points == 2401
