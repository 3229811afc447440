import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from deltasink import analytic
from deltasink.errors import DomainError, TruncationWarning, UnsupportedQueryError
from deltasink.field import absorbed_flux, balance, reconstruct, snapshot, survival
from deltasink.model import (
    ConstantSink,
    DeltaAt,
    ExponentialSink,
    Gaussian,
    InverseTimeSink,
    LinearSink,
    Problem,
    SpaceGrid,
    TimeGrid,
    ZeroSink,
)
from deltasink.volterra import solve_origin

GRID = TimeGrid(4.0, 4096)
SPACE = SpaceGrid(12.0, 2401)


@pytest.fixture(scope="module")
def constant_run():
    p = Problem(1.0, ConstantSink(1.0), DeltaAt(-1.0))
    return p, solve_origin(p, GRID)


def test_zero_sink_is_heat_kernel():
    p = Problem(1.0, ZeroSink(), DeltaAt(-1.0))
    oh = solve_origin(p, GRID)
    snap = snapshot(p, oh, SPACE, 1.0)
    exact = np.exp(-((SPACE.nodes + 1.0) ** 2) / 4.0) / math.sqrt(4 * math.pi)
    assert np.max(np.abs(snap.values - exact)) <= 1e-10


def test_constant_sink_pointwise(backend, constant_run):
    p, oh = constant_run
    x = np.array([-3.0, -1.0, -0.2, -0.01, 0.0, 1e-3, 0.05, 0.5, 2.0])
    got = reconstruct(p, oh, x, 1.0)
    exact = analytic.constant_sink_propagator(x, -1.0, 1.0, 1.0, 1.0)
    assert np.max(np.abs(got - exact)) < 1e-7
    assert reconstruct(p, oh, 0.5, 1.0) == pytest.approx(exact[7], rel=1e-4)


def test_origin_consistency(backend, constant_run):
    p, oh = constant_run
    for n in (1, 2, 5, 17, 400, 4096):
        v = reconstruct(p, oh, 0.0, GRID.nodes[n])
        assert v == pytest.approx(oh.values[n], rel=1e-10, abs=1e-300)


@pytest.mark.parametrize(
    "sink", [InverseTimeSink(1.0), ExponentialSink(2.0, 0.5), LinearSink(1.0)]
)
def test_origin_consistency_other_sinks(sink):
    p = Problem(1.0, sink, Gaussian(-2.0, 0.25))
    oh = solve_origin(p, TimeGrid(2.0, 512))
    t = oh.grid.nodes
    got = np.array([reconstruct(p, oh, 0.0, t[n]) for n in range(1, 513, 31)])
    assert np.allclose(got, oh.values[1:513:31], rtol=1e-10, atol=0)


def test_delta_on_the_sink_symmetric_and_accurate():
    p = Problem(1.0, ConstantSink(1.0), DeltaAt(0.0))
    oh = solve_origin(p, TimeGrid(2.0, 4096))
    snap = snapshot(p, oh, SPACE, 1.0)
    assert np.max(np.abs(snap.values - snap.values[::-1])) <= 1e-9
    exact = analytic.constant_sink_propagator(SPACE.nodes, 0.0, 1.0, 1.0, 1.0)
    assert np.max(np.abs(snap.values - exact)) / exact.max() < 1e-5


def test_inverse_time_field(constant_run):
    p = Problem(1.0, InverseTimeSink(1.0), DeltaAt(-1.0))
    oh = solve_origin(p, GRID)
    snap = snapshot(p, oh, SPACE, 2.0)
    exact = analytic.inverse_time_propagator(SPACE.nodes, -1.0, 2.0, 1.0, 1.0)
    assert np.max(np.abs(snap.values - exact)) < 1e-7
    assert snap.values.min() >= -1e-9


def test_off_grid_and_initial_time(constant_run):
    p, oh = constant_run
    with pytest.raises(DomainError, match="nearest nodes"):
        reconstruct(p, oh, 0.3, 1.0001)
    with pytest.raises(UnsupportedQueryError):
        reconstruct(p, oh, 0.3, 0.0)
    with pytest.raises(DomainError):
        snapshot(p, oh, SPACE, 0.0)
    q = Problem(1.0, ConstantSink(1.0), Gaussian(-1.0, 0.3))
    assert reconstruct(q, solve_origin(q, TimeGrid(1.0, 8)), -1.0, 0.0) == pytest.approx(
        1 / (0.3 * math.sqrt(2 * math.pi))
    )


def test_survival_zero_sink_is_one():
    p = Problem(1.0, ZeroSink(), Gaussian(0.5, 0.7))
    oh = solve_origin(p, GRID)
    with pytest.warns(TruncationWarning):
        s = survival([snapshot(p, oh, SPACE, t) for t in (0.5, 2.0, 4.0)])
    # the wide late profiles reach the window edge; closed-form tails restore the mass
    assert s.truncated[-1]
    assert np.allclose(s.values, 1.0, atol=1e-6)
    with pytest.warns(TruncationWarning):
        bare = survival([snapshot(p, oh, SPACE, 4.0)], include_tails=False)
    assert bare.values[0] < 1.0 - 1e-6


def test_survival_matches_absorbed(constant_run):
    p, oh = constant_run
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        s = survival(snapshot(p, oh, SPACE, 1.0))
    A = absorbed_flux(p, oh)[GRID.index_of(1.0)]
    assert s.values[0] == pytest.approx(1.0 - A, abs=1e-6)


def test_absorbed_flux_against_quadrature(constant_run):
    p, oh = constant_run
    ref = 2.0 * integrate.quad(lambda s: analytic.constant_sink_propagator(0.0, -1.0, s, 1.0, 1.0), 1e-12, 1.0, limit=200)[0]
    assert absorbed_flux(p, oh)[GRID.index_of(1.0)] == pytest.approx(ref, rel=1e-6)


def test_absorbed_flux_zero_and_self_damping():
    p0 = Problem(1.0, ZeroSink(), DeltaAt(-1.0))
    assert not np.any(absorbed_flux(p0, solve_origin(p0, GRID)))
    A = []
    for k0 in (1.0, 2.0):
        p = Problem(1.0, ConstantSink(k0), DeltaAt(-1.0))
        A.append(absorbed_flux(p, solve_origin(p, GRID))[GRID.index_of(1.0)])
    assert A[1] < 2 * A[0]


def test_truncation_warning():
    p = Problem(1.0, ConstantSink(1.0), DeltaAt(-1.0))
    oh = solve_origin(p, GRID)
    narrow = SpaceGrid(3.0, 601)
    with pytest.warns(TruncationWarning):
        s = survival(snapshot(p, oh, narrow, 4.0))
    assert s.truncated.all()


@pytest.mark.parametrize(
    "sink",
    [ConstantSink(1.0), InverseTimeSink(1.0), LinearSink(1.0), ExponentialSink(1.0, 1.0)],
)
def test_balance_invariants(sink):
    p = Problem(1.0, sink, DeltaAt(-1.0))
    oh = solve_origin(p, GRID)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        rep = balance(p, oh, SPACE)
    assert rep.max_residual <= 1e-5
    assert np.all(np.diff(rep.survival) <= 1e-12)
    assert np.all(np.diff(rep.absorbed) >= 0)
    assert np.all((rep.survival >= 0) & (rep.survival <= 1 + 1e-9))


def test_sink_monotonicity_of_survival():
    S = []
    for k0 in (0.5, 1.0, 3.0):
        p = Problem(1.0, ConstantSink(k0), DeltaAt(-1.0))
        S.append(balance(p, solve_origin(p, TimeGrid(2.0, 512)), SPACE).survival)
    assert np.all(S[1] <= S[0]) and np.all(S[2] <= S[1])


def test_abel_scheme_reconstruction():
    p = Problem(1.0, ConstantSink(1.0), DeltaAt(-1.0))
    oh = solve_origin(p, GRID, scheme="abel")
    x = np.array([-1.0, 0.0, 0.3])
    exact = analytic.constant_sink_propagator(x, -1.0, 2.0, 1.0, 1.0)
    assert np.allclose(reconstruct(p, oh, x, 2.0), exact, rtol=1e-4)
    assert balance(p, oh, SPACE).max_residual <= 1e-5


def test_weak_sink_survival_tends_to_one():
    gaps = []
    for k0 in (1e-1, 1e-2, 1e-3):
        p = Problem(1.0, ConstantSink(k0), DeltaAt(-1.0))
        rep = balance(p, solve_origin(p, TimeGrid(2.0, 256)), SPACE)
        gaps.append(float(np.max(1.0 - rep.survival)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 2e-3
