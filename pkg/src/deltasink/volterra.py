"""Origin density P(0, t) from the second-kind Abel-Volterra equation

    P(0, t) + 1/sqrt(pi D) * int_0^t k(s) P(0, s) / sqrt(t - s) ds = f(t),

where f is the free (sink-less) evolution of the initial density evaluated at
the origin.  Two product-integration schemes on a uniform grid are provided:

``"weighted"`` (default)
    The ratio P(0, t)/f(t), which stays O(1) and smooth even while P itself
    rises like exp(-x0**2/4Dt), is interpolated piecewise linearly; the known
    factor k(t) f(t) is folded into the weights, which are computed with
    Gauss-Legendre nodes on regular intervals and Gauss-Jacobi nodes on the
    interval carrying the 1/sqrt singularity.
``"abel"``
    The product k(t) P(0, t) is interpolated piecewise linearly and the
    kernel is integrated exactly (closed-form Abel moments).  Second order
    for smooth data but loses relative accuracy at early times when the
    density at the origin rises faster than the grid resolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import kernels
from .errors import DomainError, NumericalBreakdownError
from .model import (
    DeltaAt,
    Gaussian,
    InverseTimeSink,
    TabulatedIC,
    ZeroSink,
    evaluate_sink,
    origin_density,
    validate_problem,
)
from .specfun import erf_difference, erfcx

SCHEMES = ("weighted", "abel")

_SEGMENT_CHUNK = 1 << 21


# --------------------------------------------------------------------------
# free evolution of the initial density
# --------------------------------------------------------------------------


def _tabulated_free(ic, D, x, t):
    xs, rho = ic.arrays()
    slope = np.diff(rho) / np.diff(xs)
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    shape = x.shape
    x = x.ravel()
    t = t.ravel()
    out = np.empty(x.size)
    nseg = slope.size
    step = max(1, _SEGMENT_CHUNK // max(nseg, 1))
    for s in range(0, x.size, step):
        xc = x[s : s + step, None]
        sig = np.sqrt(2.0 * D * t[s : s + step, None])
        a = xs[None, :-1] - xc
        b = xs[None, 1:] - xc
        base = rho[None, :-1] + slope[None, :] * (xc - xs[None, :-1])
        mass = 0.5 * erf_difference(a / (sig * math.sqrt(2.0)), b / (sig * math.sqrt(2.0)))
        norm = 1.0 / (sig * math.sqrt(2.0 * math.pi))
        first = sig * sig * norm * (np.exp(-0.5 * (a / sig) ** 2) - np.exp(-0.5 * (b / sig) ** 2))
        out[s : s + step] = np.sum(base * mass + slope[None, :] * first, axis=1)
    return out.reshape(shape)


def free_evolution(ic, D, x, t):
    """Heat-kernel evolution of the initial density, at x and t > 0 (broadcast)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("free evolution needs t > 0")
    if isinstance(ic, DeltaAt):
        out = np.exp(-((x - ic.x0) ** 2) / (4.0 * D * t)) / np.sqrt(4.0 * math.pi * D * t)
    elif isinstance(ic, Gaussian):
        var = ic.width**2 + 2.0 * D * t
        out = np.exp(-((x - ic.center) ** 2) / (2.0 * var)) / np.sqrt(2.0 * math.pi * var)
    elif isinstance(ic, TabulatedIC):
        out = _tabulated_free(ic, D, x, t)
    else:
        raise DomainError(f"unknown initial condition {ic!r}")
    return float(out) if out.ndim == 0 else out


def free_origin_forcing(p, t):
    """Free evolution at the origin, f(t); f(0) is the initial origin density."""
    ta = np.asarray(t, dtype=float)
    if np.any(np.isnan(ta)) or np.any(ta < 0):
        raise DomainError("forcing evaluated at negative or NaN time")
    out = np.empty(ta.shape)
    pos = ta > 0
    out[~pos] = origin_density(p.initial_condition)
    if np.any(pos):
        out[pos] = free_evolution(p.initial_condition, p.D, 0.0, ta[pos])
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# exact product-integration weights
# --------------------------------------------------------------------------


def _heat_moments(tau, a):
    """Antiderivatives F0 = int tau^-1/2 e^{-a/tau}, F1 = int tau^1/2 e^{-a/tau}.

    Both vanish at tau = 0.  With a = 0 these are the Abel moments
    2 sqrt(tau) and (2/3) tau^{3/2}.
    """
    tau, a = np.broadcast_arrays(np.asarray(tau, float), np.asarray(a, float))
    F0 = np.zeros(tau.shape)
    F1 = np.zeros(tau.shape)
    free = a == 0
    F0[free] = 2.0 * np.sqrt(tau[free])
    F1[free] = (2.0 / 3.0) * tau[free] ** 1.5
    live = (~free) & (tau > 0)
    if np.any(live):
        tl, al = tau[live], a[live]
        y = np.sqrt(al / tl)
        with np.errstate(under="ignore"):
            e = np.exp(-al / tl)
        f0 = 2.0 * np.sqrt(tl) * e * (1.0 - math.sqrt(math.pi) * y * erfcx(y))
        F0[live] = f0
        F1[live] = (2.0 / 3.0) * (tl**1.5 * e - al * f0)
    return F0, F1


def _interval_weights(h, mmax, a=0.0):
    """Left/right hat weights for intervals with tau in [(m-1)h, mh], m=1..mmax.

    ``a`` may be an array of shape (nx, 1) to get one row per position.
    """
    m = np.arange(1, mmax + 1, dtype=float)
    F0, F1 = _heat_moments(h * np.concatenate(([0.0], m)), a)
    d0 = np.diff(F0, axis=-1)
    d1 = np.diff(F1, axis=-1)
    left = (d1 - (m - 1.0) * h * d0) / h
    right = (m * h * d0 - d1) / h
    return left, right


def abel_weights(grid, n):
    """Weights w[j] with sum_j w[j] g(t_j) = int_0^{t_n} g(s)/sqrt(t_n - s) ds.

    Exact for g piecewise linear on the grid; all weights are non-negative.
    """
    if int(n) != n or not 1 <= n <= grid.n_steps:
        raise DomainError(f"step index must be in 1..{grid.n_steps}, got {n}")
    n = int(n)
    left, right = _interval_weights(grid.h, n)
    w = np.zeros(n + 1)
    # interval j spans tau in [(n-j-1)h, (n-j)h]
    w[:n] += left[::-1]
    w[1:] += right[::-1]
    return w


# --------------------------------------------------------------------------
# origin history
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedRep:
    ratio: np.ndarray  # P/f at nodes
    Y: np.ndarray  # per-interval, per-node products (GL weight * k f * interpolated ratio)
    xi: np.ndarray
    eta: np.ndarray
    GFA: np.ndarray  # Gauss-Jacobi weights of the final interval on r at its left node
    GFB: np.ndarray  # ... and at its right node
    first: object = None  # FirstInterval when the forcing is singular at t = 0


@dataclass(frozen=True)
class FirstInterval:
    """Source on [0, h] when f ~ t**-1/2 there (delta initial density on the sink).

    ``mass[q]`` integrates k f r against Gauss-Jacobi nodes ``times`` with the
    t**-1/2 factor absorbed, for use once the kernel is smooth (n >= 2);
    ``both[q]`` does the same at Chebyshev nodes ``cheb_times`` with both
    end singularities absorbed, for the kernel centred at t_1.
    """

    times: np.ndarray
    mass: np.ndarray
    cheb_times: np.ndarray
    both: np.ndarray


@dataclass(frozen=True)
class AbelRep:
    source: np.ndarray  # k P at nodes, first node by its limiting rule
    tie_first: bool  # source on [0, h] held at its value at h


@dataclass(frozen=True)
class OriginHistory:
    """P(0, t_n) on a time grid together with the free forcing f(t_n)."""

    grid: object
    values: np.ndarray
    forcing: np.ndarray
    scheme: str = "weighted"
    rep: object = field(default=None, repr=False, compare=False)

    @property
    def times(self):
        return self.grid.nodes


@lru_cache(maxsize=None)
def _nodes(order):
    xg, wg = roots_legendre(order)
    yj, vj = roots_jacobi(order, -0.5, 0.0)
    xi = 0.5 * (xg + 1.0)
    om = 0.5 * wg
    eta = 0.5 * (yj + 1.0)
    nu = vj / math.sqrt(2.0)
    return xi, om, eta, nu


def _source_start(p, f0):
    """k(0) P(0, 0), or None when it must be tied to the first step."""
    if isinstance(p.sink, InverseTimeSink):
        return 0.0  # valid ICs vanish at the origin faster than 1/t grows
    if not math.isfinite(f0):
        return None
    return float(evaluate_sink(p.sink, 0.0)) * f0


def _solve_weighted(p, grid, f, order):
    h = grid.h
    t = grid.nodes
    c = 1.0 / math.sqrt(math.pi * p.D)
    xi, om, eta, nu = _nodes(order)
    singular = not math.isfinite(f[0])
    tq = t[:-1, None] + h * xi[None, :]
    tj = t[:-1, None] + h * eta[None, :]
    if singular:
        # P/f ~ 1 - C sqrt(t) for a delta on the sink: interpolate in sqrt(t)
        st = np.sqrt(t)
        ds = np.diff(st)[:, None]
        lam_q = (np.sqrt(tq) - st[:-1, None]) / ds
        lam_e = (np.sqrt(tj) - st[:-1, None]) / ds
    else:
        lam_q = np.broadcast_to(xi, tq.shape)
        lam_e = np.broadcast_to(eta, tj.shape)
    g = evaluate_sink(p.sink, tq) * free_origin_forcing(p, tq)
    GA = np.ascontiguousarray(h * om * g * (1.0 - lam_q))
    GB = np.ascontiguousarray(h * om * g * lam_q)
    GF = math.sqrt(h) * nu * evaluate_sink(p.sink, tj) * free_origin_forcing(p, tj)
    GFA = np.ascontiguousarray(GF * (1.0 - lam_e))
    GFB = np.ascontiguousarray(GF * lam_e)
    if isinstance(p.sink, InverseTimeSink):
        # k = alpha/t keeps P/f away from 1 as t -> 0 (constant for a delta
        # IC), so the ratio is held at its t_1 value over the first interval
        GB[0] += GA[0]
        GA[0] = 0.0
        GFB[0] += GFA[0]
        GFA[0] = 0.0
    FA = GFA.sum(axis=1)
    FB = GFB.sum(axis=1)
    m = np.arange(grid.n_steps + 1, dtype=float)[:, None]
    K = np.zeros((grid.n_steps + 1, order))
    K[2:] = 1.0 / np.sqrt(h * (m[2:] - xi[None, :]))
    extra = np.zeros(grid.n_steps + 1)
    first = None
    if singular:
        first, extra = _first_interval(p, grid, f, order, c)
        GA[0] = GB[0] = 0.0
        GFA[0] = GFB[0] = 0.0
        FA[0] = np.sum(first.both_a)
        FB[0] = np.sum(first.both_b)
    fm = np.array(f, dtype=float)
    fm[0] = 0.0  # never read by the march; keeps a singular f(0) out of it
    r, Y, fail = kernels.march_weighted(fm, GA, GB, FA, FB, K, c, extra)
    if fail >= 0:
        raise NumericalBreakdownError(f"non-positive diagonal coefficient at step {fail}")
    if first is not None:
        first = first.finish(r[1])
    values = f * r
    values[0] = f[0]
    return values, WeightedRep(r, Y, xi, eta, GFA, GFB, first)


class _FirstDraft:
    """Weights of the singular first interval before r_1 is known."""

    def __init__(self, t_j, wa, wb, t_c, both_a, both_b):
        self.t_j, self.wa, self.wb = t_j, wa, wb
        self.t_c, self.both_a, self.both_b = t_c, both_a, both_b

    def finish(self, r1):
        # the ratio P/f tends to 1 as t -> 0 for a delta on the sink
        return FirstInterval(self.t_j, self.wa + self.wb * r1, self.t_c, self.both_a + self.both_b * r1)


def _first_interval(p, grid, f, order, c):
    h = grid.h
    t = grid.nodes
    # Gauss-Jacobi with weight (1 + y)**-1/2: absorbs t**-1/2 at the left end
    y, w = roots_jacobi(order, 0.0, -0.5)
    tj = 0.5 * h * (1.0 + y)
    smooth = evaluate_sink(p.sink, tj) * free_origin_forcing(p, tj) * np.sqrt(tj)
    base = math.sqrt(0.5 * h) * w * smooth
    s = np.sqrt(tj / h)
    wa, wb = base * (1.0 - s), base * s
    # Chebyshev nodes absorb both t**-1/2 and (h - t)**-1/2 for the first step
    yc = np.cos((2.0 * np.arange(order) + 1.0) * math.pi / (2.0 * order))
    tc = 0.5 * h * (1.0 + yc)
    smooth_c = (math.pi / order) * evaluate_sink(p.sink, tc) * free_origin_forcing(p, tc) * np.sqrt(tc)
    sc = np.sqrt(tc / h)
    draft = _FirstDraft(tj, wa, wb, tc, smooth_c * (1.0 - sc), smooth_c * sc)
    # r_1 from the first step alone (r_0 = 1), then the first interval's history
    r1 = (f[1] - c * np.sum(draft.both_a)) / (f[1] + c * np.sum(draft.both_b))
    mass = wa + wb * r1
    extra = np.zeros(grid.n_steps + 1)
    extra[2:] = (1.0 / np.sqrt(t[2:, None] - tj[None, :])) @ mass
    return draft, extra


def _solve_abel(p, grid, f):
    N = grid.n_steps
    c = 1.0 / math.sqrt(math.pi * p.D)
    k = np.empty(N + 1)
    k[1:] = evaluate_sink(p.sink, grid.nodes[1:])
    u0 = _source_start(p, f[0])
    tie = u0 is None
    left, right = _interval_weights(grid.h, N)
    P = np.empty(N + 1)
    P[0] = f[0]
    u = np.zeros(N + 1)
    u[0] = 0.0 if tie else u0
    # B[m-1] = L(m) + R(m+1): weight on u_j from both intervals touching it
    B = left[:-1] + right[1:]
    for n in range(1, N + 1):
        hist = np.dot(B[: n - 1][::-1], u[1:n]) if n >= 2 else 0.0
        diag = right[0]
        if tie:
            if n == 1:
                diag += left[0]
            else:
                hist += left[n - 1] * u[1]
        else:
            hist += left[n - 1] * u[0]
        den = 1.0 + c * diag * k[n]
        if den <= 0:
            raise NumericalBreakdownError(f"non-positive diagonal coefficient at step {n}")
        P[n] = (f[n] - c * hist) / den
        u[n] = k[n] * P[n]
    if tie:
        u[0] = u[1]
    return P, AbelRep(u, tie)


def solve_origin(p, grid, scheme="weighted", order=4):
    """March the integral equation over ``grid`` and return the OriginHistory."""
    validate_problem(p)
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    f = free_origin_forcing(p, grid.nodes)
    if isinstance(p.sink, ZeroSink):
        N = grid.n_steps
        if scheme == "abel":
            rep = AbelRep(np.zeros(N + 1), False)
        else:
            xi, _, eta, _ = _nodes(order)
            zero = np.zeros((N, order))
            rep = WeightedRep(np.ones(N + 1), zero, xi, eta, zero, zero)
        return OriginHistory(grid, f.copy(), f, scheme, rep)
    if scheme == "abel":
        values, rep = _solve_abel(p, grid, f)
    else:
        values, rep = _solve_weighted(p, grid, f, order)
    return OriginHistory(grid, values, f, scheme, rep)
