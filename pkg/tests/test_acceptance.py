"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time
import warnings

import mpmath
import numpy as np
import pytest

from deltasink import analytic, cli
from deltasink.errors import TruncationWarning
from deltasink.fdoracle import FdConfig, cn_solve, compare
from deltasink.field import balance, snapshot
from deltasink.laplace import (
    InversionSpec,
    exponential_sink_series,
    forcing_transform,
    invert,
    linear_sink_transform,
    transform_evaluator,
)
from deltasink.model import (
    ConstantSink,
    DeltaAt,
    ExponentialSink,
    InverseTimeSink,
    LinearSink,
    Problem,
    SpaceGrid,
    TimeGrid,
    ZeroSink,
)
from deltasink.specfun import erfc, erfcx
from deltasink.volterra import free_origin_forcing, solve_origin

D = 1.0
X0 = -1.0
GRID = TimeGrid(4.0, 4096)
SPACE = SpaceGrid(12.0, 4801)

SINKS = {
    "zero": ZeroSink(),
    "constant": ConstantSink(1.0),
    "inverse_time": InverseTimeSink(1.0),
    "linear": LinearSink(1.0),
    "exponential": ExponentialSink(1.0, 1.0),
}


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}: {detail}")
        return ok

    return emit


def _origin_at(oh, times):
    return np.array([oh.values[oh.grid.index_of(t)] for t in times])


def test_01_zero_sink_exactness(report):
    p = Problem(D, ZeroSink(), DeltaAt(X0))
    start = time.perf_counter()
    oh = solve_origin(p, GRID)
    snap = snapshot(p, oh, SPACE, 1.0)
    elapsed = time.perf_counter() - start
    f = free_origin_forcing(p, GRID.nodes[1:])
    bitwise = np.array_equal(oh.values[1:], f)
    exact = np.exp(-((SPACE.nodes - X0) ** 2) / (4 * D)) / math.sqrt(4 * math.pi * D)
    linf = float(np.max(np.abs(snap.values - exact)))
    ok = bitwise and linf <= 1e-10 and elapsed < 1.0
    assert report(1, "zero-sink exactness", ok, f"origin bitwise={bitwise}, field Linf={linf:.2e}, {elapsed:.2f}s")


def test_02_constant_sink_closed_form(report):
    p = Problem(D, ConstantSink(1.0), DeltaAt(X0))
    start = time.perf_counter()
    oh = solve_origin(p, GRID)
    elapsed = time.perf_counter() - start
    t = GRID.nodes
    sel = t >= 0.01
    exact = analytic.constant_sink_propagator(0.0, X0, t[sel], D, 1.0)
    err = float(np.max(np.abs(oh.values[sel] / exact - 1)))
    ok = err <= 1e-4 and elapsed < 10.0
    assert report(2, "constant-sink closed form", ok, f"max rel err={err:.2e} on [0.01, 4], {elapsed:.2f}s")


def test_03_three_way_agreement(report):
    p = Problem(D, ConstantSink(1.0), DeltaAt(X0))
    start = time.perf_counter()
    cfg = FdConfig.from_resolution(0.005, 1e-4, 12.0, 1.0)
    fd = cn_solve(p, cfg, save_times=[1.0]).snapshot(1.0)
    oh = solve_origin(p, GRID)
    vol = snapshot(p, oh, cfg.space, 1.0)
    exact = vol.__class__(cfg.space, 1.0, analytic.constant_sink_propagator(cfg.space.nodes, X0, 1.0, D, 1.0))
    elapsed = time.perf_counter() - start
    errs = {
        "volterra-analytic": compare(exact, vol).max_rel_linf,
        "fd-analytic": compare(exact, fd).max_rel_linf,
        "fd-volterra": compare(fd, vol).max_rel_linf,
    }
    ok = max(errs.values()) <= 1e-2 and elapsed < 60.0
    detail = ", ".join(f"{k}={v:.2e}" for k, v in errs.items())
    assert report(3, "three-way agreement", ok, f"{detail}, {elapsed:.1f}s")


def _jump_residual(alpha, xs, t, h=1e-3):
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    k = np.arange(5) * h
    right = c @ analytic.inverse_time_propagator(k, xs, t, D, alpha)
    left = -(c @ analytic.inverse_time_propagator(-k, xs, t, D, alpha))
    rhs = 2.0 * alpha / t * analytic.inverse_time_propagator(0.0, xs, t, D, alpha)
    return abs(D * (right - left) - rhs) / abs(rhs)


def test_04_inverse_time_sink(report):
    p = Problem(D, InverseTimeSink(1.0), DeltaAt(X0))
    oh = solve_origin(p, GRID)
    t = GRID.nodes
    sel = t >= 0.05
    exact = analytic.inverse_time_propagator(0.0, X0, t[sel], D, 1.0)
    err = float(np.max(np.abs(oh.values[sel] / exact - 1)))
    jump = max(
        _jump_residual(a, xs, tt) for a in (0.5, 1.0, 2.0) for xs in (-1.0, -2.0) for tt in (0.5, 1.0)
    )
    ok = err <= 1e-3 and jump <= 1e-6
    assert report(4, "inverse-time sink", ok, f"max rel err={err:.2e} on [0.05, 4], jump residual={jump:.2e}")


def test_05_linear_sink(report):
    p = Problem(D, LinearSink(1.0), DeltaAt(X0))
    times = (0.25, 0.5, 1.0, 2.0)
    ref = _origin_at(solve_origin(p, GRID), times)
    errs = []
    for alg in ("talbot", "dehoog"):
        res = invert(transform_evaluator(p), InversionSpec(times, alg, 1e-8))
        errs.append(float(np.max(np.abs(res.values / ref - 1))))
    s, h = 2.0, 1e-3
    P = lambda z: linear_sink_transform(p, z).value
    dP = (P(s - 2 * h) - 8 * P(s - h) + 8 * P(s + h) - P(s + 2 * h)) / (12 * h)
    resid = abs(dP - math.sqrt(s * D) / 1.0 * (P(s) - forcing_transform(p, s).value)) / abs(P(s))
    ok = max(errs) <= 1e-3 and resid <= 1e-8
    assert report(5, "linear sink", ok, f"inversion vs volterra={max(errs):.2e}, ODE residual={resid:.2e}")


def test_06_exponential_sink(report):
    p = Problem(D, ExponentialSink(1.0, 1.0), DeltaAt(X0))
    times = (0.5, 1.0, 2.0)
    ref = _origin_at(solve_origin(p, GRID), times)
    errs = []
    for alg in ("talbot", "dehoog"):
        res = invert(transform_evaluator(p), InversionSpec(times, alg, 1e-8))
        errs.append(float(np.max(np.abs(res.values / ref - 1))))
    tol = 1e-10
    lhs = exponential_sink_series(p, 1.0, tol=tol).value
    rhs = forcing_transform(p, 1.0).value - 1.0 / math.sqrt(D) * exponential_sink_series(p, 2.0, tol=tol).value
    resid = abs(lhs - rhs) / abs(lhs)
    ok = max(errs) <= 1e-3 and resid <= 2 * tol
    assert report(6, "exponential sink", ok, f"inversion vs volterra={max(errs):.2e}, functional residual={resid:.2e}")


def test_07_probability_balance(report):
    vol, fdr = {}, {}
    fd_cfg = FdConfig.from_resolution(0.005, 1e-4, 24.0, 4.0)
    for name, sink in SINKS.items():
        p = Problem(D, sink, DeltaAt(X0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            vol[name] = balance(p, solve_origin(p, GRID), SpaceGrid(12.0, 2401)).max_residual
        fdr[name] = float(np.max(cn_solve(p, fd_cfg, save_times=[4.0]).balance_residual))
    ok = max(vol.values()) <= 1e-5 and max(fdr.values()) <= 5e-3
    detail = ", ".join(f"{k}={vol[k]:.1e}/{fdr[k]:.1e}" for k in SINKS)
    assert report(7, "probability balance", ok, f"volterra/fd: {detail}")


def test_08_convergence_order(report):
    cfg = cli.RunConfig.from_problem(
        Problem(D, ConstantSink(1.0), DeltaAt(X0)),
        {"t_max": 4.0, "n_steps": 4096},
        converge={"t_min": 0.01},
    )
    rows = cli.convergence_table(cfg, [512, 1024, 2048, 4096])
    orders = [o for _, _, o in rows[1:]]
    ok = all(o >= 1.5 for o in orders)
    detail = ", ".join(f"{n}:{e:.2e}" for n, e, _ in rows) + " orders " + ", ".join(f"{o:.2f}" for o in orders)
    assert report(8, "convergence order", ok, detail)


def test_09_special_functions(report):
    mpmath.mp.dps = 40
    rng = np.random.default_rng(2024)
    z = rng.uniform(-26.0, 26.0, 1000)
    ref = np.array([float(mpmath.erfc(mpmath.mpf(float(v)))) for v in z])
    e1 = float(np.max(np.abs(erfc(z) / ref - 1)))
    zx = np.concatenate([rng.uniform(0.0, 5.0, 500), 10 ** rng.uniform(-3.0, 6.0, 500)])
    refx = np.array([float(mpmath.exp(mpmath.mpf(float(v)) ** 2) * mpmath.erfc(mpmath.mpf(float(v)))) for v in zx])
    e2 = float(np.max(np.abs(erfcx(zx) / refx - 1)))
    big = erfcx(1e6)
    ref_big = float(mpmath.exp(mpmath.mpf(1e6) ** 2) * mpmath.erfc(mpmath.mpf(1e6)))
    e3 = abs(big / ref_big - 1)
    # k0 sqrt(t/D) = 1e4; same-side points measured against the image value,
    # opposite-side points (image value exactly 0) against the free kernel
    k0, t = 1e4, 1.0
    same = np.array([-3.0, -2.0, -1.5, -0.5, -0.2])
    opp = np.array([0.2, 0.5, 1.0, 2.0])
    G = analytic.constant_sink_propagator(same, X0, t, D, k0)
    Ginf = analytic.absorbing_limit_propagator(same, X0, t, D)
    e4 = float(np.max(np.abs(G / Ginf - 1)))
    Go = analytic.constant_sink_propagator(opp, X0, t, D, k0)
    e5 = float(np.max(np.abs(Go - analytic.absorbing_limit_propagator(opp, X0, t, D)) / analytic.free_propagator(opp, X0, t, D)))
    ok = e1 <= 1e-12 and e2 <= 1e-12 and math.isfinite(big) and e3 <= 1e-12 and np.all(np.isfinite(G)) and max(e4, e5) <= 5e-3
    detail = f"erfc={e1:.1e}, erfcx={e2:.1e}, erfcx(1e6)={e3:.1e}, large-k0 vs image={max(e4, e5):.1e}"
    assert report(9, "special functions", ok, detail)


def test_10_laplace_pairs(report):
    pairs = [
        (lambda s: 1.0 / s, lambda t: 1.0),
        (lambda s: 1.0 / np.sqrt(s), lambda t: 1.0 / math.sqrt(math.pi * t)),
        (lambda s: np.exp(-np.sqrt(s)) / np.sqrt(s), lambda t: math.exp(-1.0 / (4 * t)) / math.sqrt(math.pi * t)),
    ]
    times = (0.5, 1.0, 2.0)
    worst, covered, total = 0.0, 0, 0
    for F, f in pairs:
        exact = np.array([f(t) for t in times])
        for alg in ("talbot", "dehoog"):
            res = invert(F, InversionSpec(times, alg, 1e-10))
            err = np.abs(res.values - exact)
            worst = max(worst, float(np.max(err / np.abs(exact))))
            covered += int(np.sum(res.estimates >= err))
            total += err.size
    ok = worst <= 1e-8 and covered >= 0.95 * total
    assert report(10, "laplace inversion pairs", ok, f"max rel err={worst:.1e}, estimates cover {covered}/{total}")
