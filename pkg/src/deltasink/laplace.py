"""Laplace-domain solutions for the origin density and their numerical inversion.

Transforming in time turns the origin equation into

    Pbar(s) = F(s) - 1/sqrt(sD) * L[k P(0, .)](s),

with F(s) the transform of the free forcing.  Three sink laws are handled:

constant       Pbar = F / (1 + k0 / sqrt(sD))
linear         L[t g](s) = -d/ds gbar turns the relation into the first-order
               ODE  Pbar' = (sqrt(sD) / alpha) (Pbar - F), whose solution
               bounded as Re s grows is an integral over s' from s to infinity
exponential    L[e^{-lam t} g](s) = gbar(s + lam) gives
               Pbar(s) = F(s) - beta / sqrt(sD) * Pbar(s + lam), iterated into
               an alternating series

Inversion is by a fixed Talbot contour or by de Hoog's accelerated Fourier
series; both return per-time error estimates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import erfcx as _cerfcx

from .errors import AccuracyError, ConvergenceError, DomainError, UnsupportedQueryError
from .model import (
    ConstantSink,
    DeltaAt,
    ExponentialSink,
    Gaussian,
    LinearSink,
    TabulatedIC,
    ZeroSink,
)

EPS = np.finfo(float).eps
ALGORITHMS = ("talbot", "dehoog")

# fixed Talbot contour of Weideman (2006)
_TALBOT = (0.6122, 0.5017, 0.6407, 0.2645)


@dataclass(frozen=True)
class TransformValue:
    """Pbar(0, s) with the method that produced it.

    ``method`` is one of "direct", "ode-integral", "series"; ``n_terms`` is
    set for the series.
    """

    s: complex
    value: complex
    method: str
    n_terms: Optional[int] = None


# --------------------------------------------------------------------------
# forcing transform
# --------------------------------------------------------------------------


def _phi1(u):
    """(1 - exp(-u)) / u, stable near u = 0."""
    u = np.asarray(u, dtype=complex)
    out = np.empty(u.shape, dtype=complex)
    small = np.abs(u) < 1.0
    us = u[small]
    acc = np.zeros(us.shape, dtype=complex)
    term = np.ones(us.shape, dtype=complex)
    for k in range(1, 24):
        acc += term
        term = term * (-us) / (k + 1)
    out[small] = acc
    ub = u[~small]
    out[~small] = -np.expm1(-ub) / ub
    return out


def _phi2(u):
    """(1 - exp(-u) (1 + u)) / u**2, stable near u = 0."""
    u = np.asarray(u, dtype=complex)
    out = np.empty(u.shape, dtype=complex)
    small = np.abs(u) < 1.0
    us = u[small]
    # sum_k (-u)^k (k + 1) / (k + 2)!
    acc = np.zeros(us.shape, dtype=complex)
    fact = 2.0
    pw = np.ones(us.shape, dtype=complex)
    for k in range(24):
        acc += pw * (k + 1) / fact
        pw = pw * (-us)
        fact *= k + 3
    out[small] = acc
    ub = u[~small]
    out[~small] = (1.0 - np.exp(-ub) * (1.0 + ub)) / (ub * ub)
    return out


def _half_line_moment(xs, rho, q):
    """int_0^inf exp(-q x) rho(x) dx for rho piecewise linear on xs >= 0."""
    a, b = xs[:-1], xs[1:]
    d = b - a
    slope = np.diff(rho) / d
    qq = q[..., None]
    u = qq * d
    seg = np.exp(-qq * a) * (rho[:-1] * d * _phi1(u) + slope * d * d * _phi2(u))
    return np.sum(seg, axis=-1)


def _split_table(ic):
    xs, rho = ic.arrays()
    if xs[0] < 0 < xs[-1] and not np.any(xs == 0):
        k = np.searchsorted(xs, 0.0)
        r0 = np.interp(0.0, xs, rho)
        xs = np.insert(xs, k, 0.0)
        rho = np.insert(rho, k, r0)
    pos = xs >= 0
    neg = xs <= 0
    right = (xs[pos], rho[pos])
    left = (-xs[neg][::-1], rho[neg][::-1])
    return left, right


def _exp_moment(ic, q):
    """int exp(-q |x|) P(x, 0) dx for complex q with Re q > 0."""
    q = np.asarray(q, dtype=complex)
    if isinstance(ic, DeltaAt):
        return np.exp(-q * abs(ic.x0))
    if isinstance(ic, Gaussian):
        m, w = ic.center, ic.width
        u1 = (q * w * w - m) / (w * math.sqrt(2.0))
        u2 = (q * w * w + m) / (w * math.sqrt(2.0))
        return 0.5 * math.exp(-m * m / (2.0 * w * w)) * (_cerfcx(u1) + _cerfcx(u2))
    if isinstance(ic, TabulatedIC):
        out = np.zeros(q.shape, dtype=complex)
        for xs, rho in _split_table(ic):
            if xs.size >= 2:
                out = out + _half_line_moment(xs, rho, q)
        return out
    raise DomainError(f"unknown initial condition {ic!r}")


def _forcing_from_root(p, r):
    """F(s) given r = sqrt(s) on the branch in use."""
    r = np.asarray(r, dtype=complex)
    sd = math.sqrt(p.D)
    return _exp_moment(p.initial_condition, r / sd) / (2.0 * sd * r)


def _check_s(s):
    s = np.asarray(s, dtype=complex)
    if np.any(~np.isfinite(s)):
        raise DomainError("transform argument must be finite")
    return s


def forcing_transform(p, s):
    """Transform F(s) of the free forcing, for Re s > 0.

    Examples
    --------
    >>> from deltasink.model import Problem, ZeroSink, DeltaAt
    >>> p = Problem(1.0, ZeroSink(), DeltaAt(-1.0))
    >>> round(forcing_transform(p, 1.0).value.real, 6)
    0.18394
    """
    sa = _check_s(s)
    if np.any(sa.real <= 0):
        raise DomainError("forcing transform needs Re(s) > 0")
    v = _forcing_values(p, sa)
    return _wrap(s, v, "direct")


def _forcing_values(p, s):
    return _forcing_from_root(p, np.sqrt(np.asarray(s, dtype=complex)))


def _wrap(s, v, method, n_terms=None):
    if np.ndim(v) == 0:
        return TransformValue(complex(s), complex(v), method, n_terms)
    return TransformValue(np.asarray(s, dtype=complex), np.asarray(v), method, n_terms)


# --------------------------------------------------------------------------
# constant and linear sinks
# --------------------------------------------------------------------------


def constant_sink_transform(p, s):
    """Pbar(0, s) = F(s) / (1 + k0 / sqrt(sD)) for a constant sink."""
    sa = _check_s(s)
    r = np.sqrt(sa)
    F = _forcing_from_root(p, r)
    v = F / (1.0 + p.sink.k0 / (math.sqrt(p.D) * r))
    return _wrap(s, v, "direct")


def _quad_complex(fun, a, b, epsrel):
    """Integrate a complex-valued function by its real and imaginary parts."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, ere = integrate.quad(lambda v: fun(v).real, a, b, epsabs=1e-300, epsrel=epsrel, limit=400)
        im, eim = integrate.quad(lambda v: fun(v).imag, a, b, epsabs=1e-300, epsrel=epsrel, limit=400)
    return complex(re, im), math.hypot(ere, eim)


def _linear_scalar(p, s, epsrel):
    alpha = p.sink.alpha
    flip = s.imag < 0
    if flip:
        s = s.conjugate()
    c = 2.0 * math.sqrt(p.D) / (3.0 * alpha)
    arg_s = math.atan2(s.imag, s.real)  # in [0, pi]
    arg_z = 1.5 * arg_s
    z = abs(s) ** 1.5 * complex(math.cos(arg_z), math.sin(arg_z))
    # rotate the path so s' = (z + v e^{i phi} / c)^{2/3} never crosses the cut
    phi = max(0.0, 0.5 * (arg_z - 0.5 * math.pi))
    e = complex(math.cos(phi), math.sin(phi))

    def integrand(v):
        w = z + v * e / c
        a = math.atan2(w.imag, w.real)
        if a < 0:
            a += 2.0 * math.pi
        root = abs(w) ** (1.0 / 3.0) * complex(math.cos(a / 3.0), math.sin(a / 3.0))
        return complex(_forcing_from_root(p, root)) * np.exp(-v * e) * e

    val, err = _quad_complex(integrand, 0.0, np.inf, epsrel)
    if not math.isfinite(val.real) or err > 1e3 * epsrel * max(abs(val), 1e-300):
        raise AccuracyError("linear-sink transform quadrature did not converge", val, err)
    return val.conjugate() if flip else val


def linear_sink_transform(p, s, epsrel=1e-13):
    """Pbar(0, s) for k(t) = alpha t, the solution of

        Pbar' = (sqrt(sD) / alpha) (Pbar - F)

    that stays bounded as Re s grows:

        Pbar(s) = (sqrt(D) / alpha) int_s^inf sqrt(s') F(s') exp(-c (s'^{3/2} - s^{3/2})) ds',

    with c = 2 sqrt(D) / (3 alpha).  Substituting v = c (s'^{3/2} - s^{3/2}) gives
    int_0^inf F(s'(v)) exp(-v) dv, evaluated along a ray in v rotated just
    enough that s'(v) keeps to the principal sheet for any s off the negative
    real axis.
    """
    if not isinstance(p.sink, LinearSink):
        raise UnsupportedQueryError("linear_sink_transform needs a LinearSink problem")
    if not p.sink.alpha > 0:
        raise DomainError("linear sink needs alpha > 0; use the forcing transform for alpha = 0")
    sa = _check_s(s)
    if np.any((sa.imag == 0) & (sa.real <= 0)):
        raise DomainError("transform undefined on the non-positive real axis")
    if sa.ndim == 0:
        return _wrap(s, _linear_scalar(p, complex(sa), epsrel), "ode-integral")
    v = np.array([_linear_scalar(p, complex(x), epsrel) for x in sa.ravel()]).reshape(sa.shape)
    return _wrap(s, v, "ode-integral")


def linear_sink_transform_ray(p, s, angle=0.0, epsrel=1e-12):
    """The same transform integrated literally along s' = s + u e^{i angle}.

    Used as an independent check of path independence; only valid when the
    ray and the point s stay in Re s > 0.
    """
    alpha = p.sink.alpha
    c = 2.0 * math.sqrt(p.D) / (3.0 * alpha)
    s = complex(s)
    e = complex(math.cos(angle), math.sin(angle))
    s15 = s**1.5

    def integrand(u):
        sp = s + u * e
        return (math.sqrt(p.D) / alpha) * np.sqrt(sp) * complex(_forcing_values(p, sp)) * np.exp(
            -c * (sp**1.5 - s15)
        ) * e

    val, _ = _quad_complex(integrand, 0.0, np.inf, epsrel)
    return val


# --------------------------------------------------------------------------
# exponential sink
# --------------------------------------------------------------------------


def exponential_sink_series(p, s, tol=1e-12, max_terms=200):
    """Pbar(0, s) for k(t) = beta exp(-decay t) as the series

        sum_n (-beta)^n F(s + n decay) prod_{j<n} (D (s + j decay))^{-1/2},

    stopped once a term falls below ``tol`` times the partial sum.
    """
    sink = p.sink
    if not isinstance(sink, ExponentialSink):
        raise UnsupportedQueryError("exponential_sink_series needs an ExponentialSink problem")
    if not sink.decay > 0:
        raise DomainError("the shift series needs decay > 0")
    sa = _check_s(s)
    if np.any((sa.imag == 0) & (sa.real <= 0)):
        raise DomainError("transform undefined on the non-positive real axis")
    beta, lam = sink.beta, sink.decay
    total = np.zeros(sa.shape, dtype=complex)
    coef = np.ones(sa.shape, dtype=complex)
    active = np.ones(sa.shape, dtype=bool)
    used = 0
    for n in range(max_terms):
        sn = sa + n * lam
        term = coef * _forcing_values(p, sn)
        total = total + np.where(active, term, 0.0)
        used = n + 1
        active &= ~(np.abs(term) < tol * np.abs(total))
        if beta == 0 or not np.any(active):
            break
        coef = coef * (-beta) / np.sqrt(p.D * sn)
    else:
        raise ConvergenceError(f"exponential-sink series did not reach tol={tol} in {max_terms} terms")
    v = complex(total) if sa.ndim == 0 else total
    return _wrap(s, v, "series", used)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def origin_transform(p, s, tol=1e-12):
    """Pbar(0, s) for any sink law with a Laplace-domain solution."""
    sink = p.sink
    if isinstance(sink, ZeroSink):
        return _wrap(s, _forcing_values(p, _check_s(s)), "direct")
    if isinstance(sink, ConstantSink):
        return constant_sink_transform(p, s)
    if isinstance(sink, LinearSink):
        if sink.alpha == 0:
            return _wrap(s, _forcing_values(p, _check_s(s)), "direct")
        return linear_sink_transform(p, s)
    if isinstance(sink, ExponentialSink):
        return exponential_sink_series(p, s, tol=tol)
    raise UnsupportedQueryError(f"no Laplace-domain solution for the {sink.kind} sink")


def transform_evaluator(p, tol=1e-12):
    """A vectorized s -> Pbar(0, s) callable for :func:`invert`."""

    def ev(s):
        return np.asarray(origin_transform(p, s, tol=tol).value)

    return ev


# --------------------------------------------------------------------------
# inversion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionSpec:
    """What to invert and how.

    Parameters
    ----------
    times : sequence of float
        Target times, all > 0.
    algorithm : {"talbot", "dehoog"}
    accuracy : float
        Requested relative accuracy, in [1e-12, 1e-2].
    talbot_nodes : int, optional
        Contour size; chosen from ``accuracy`` when omitted.
    dehoog_terms : int
        Continued-fraction depth M (2M + 1 transform samples per time).
    dehoog_scale : float
        Period T = dehoog_scale * t of the underlying Fourier series.
    """

    times: tuple
    algorithm: str = "talbot"
    accuracy: float = 1e-8
    talbot_nodes: Optional[int] = None
    dehoog_terms: int = 20
    dehoog_scale: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in np.atleast_1d(self.times)))
        if not self.times or any(not (t > 0 and math.isfinite(t)) for t in self.times):
            raise DomainError("inversion times must be finite and positive")
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"unknown inversion algorithm {self.algorithm!r}")
        if not 1e-12 <= self.accuracy <= 1e-2:
            raise DomainError("accuracy must lie in [1e-12, 1e-2]")
        if self.dehoog_terms < 2 or self.dehoog_scale <= 1.0:
            raise DomainError("de Hoog needs at least 2 terms and a period longer than t")


@dataclass(frozen=True)
class InversionResult:
    times: np.ndarray
    values: np.ndarray
    estimates: np.ndarray
    algorithm: str
    ok: np.ndarray = field(default=None)


def _talbot_n(accuracy):
    n = int(math.ceil(-math.log(accuracy) / 1.358)) + 4
    return n + (n % 2)


def _talbot_once(F, t, N):
    sig, mu, a, nu = _TALBOT
    th = math.pi - (np.arange(N // 2) + 0.5) * 2.0 * math.pi / N
    cot = 1.0 / np.tan(a * th)
    z = (N / t) * (-sig + mu * th * cot + 1j * nu * th)
    dz = (N / t) * (mu * (cot - a * th / np.sin(a * th) ** 2) + 1j * nu)
    terms = np.exp(z * t) * np.asarray(F(z), dtype=complex) * dz
    val = (2.0 / N) * float(np.sum(terms.imag))
    floor = 10.0 * EPS * (2.0 / N) * float(np.sum(np.abs(terms)))
    return val, floor


def _talbot(F, t, N):
    v1, _ = _talbot_once(F, t, N)
    v2, floor = _talbot_once(F, t, N + 8)
    return v2, abs(v2 - v1) + floor


def _dehoog(F, t, M, tol, scale):
    T = scale * t
    gamma = -math.log(tol) / (2.0 * T)
    NP = 2 * M + 1
    s = gamma + 1j * math.pi * np.arange(NP) / T
    fp = np.asarray(F(s), dtype=complex)
    # quotient-difference table
    e = np.zeros((NP, M + 1), dtype=complex)
    q = np.zeros((2 * M, M), dtype=complex)
    q[0, 0] = fp[1] / (fp[0] / 2.0)
    q[1:, 0] = fp[2 : 2 * M + 1] / fp[1 : 2 * M]
    for r in range(1, M + 1):
        mr = 2 * (M - r) + 1
        e[0:mr, r] = q[1 : mr + 1, r - 1] - q[0:mr, r - 1] + e[1 : mr + 1, r - 1]
        if r != M:
            mq = 2 * (M - r)
            q[0:mq, r] = q[1 : mq + 1, r - 1] * e[1 : mq + 1, r] / e[0:mq, r]
    d = np.zeros(NP, dtype=complex)
    d[0] = fp[0] / 2.0
    for r in range(1, M + 1):
        d[2 * r - 1] = -q[0, r - 1]
        d[2 * r] = -e[0, r]
    # continued-fraction recurrences
    A = np.zeros(NP + 1, dtype=complex)
    B = np.zeros(NP + 1, dtype=complex)
    A[1] = d[0]
    B[0] = B[1] = 1.0
    zz = np.exp(1j * math.pi * t / T)
    for i in range(1, 2 * M):
        A[i + 1] = A[i] + d[i] * A[i - 1] * zz
        B[i + 1] = B[i] + d[i] * B[i - 1] * zz
    brem = (1.0 + (d[2 * M - 1] - d[2 * M]) * zz) / 2.0
    rem = -brem * (1.0 - np.sqrt(1.0 + d[2 * M] * zz / brem**2))
    A[NP] = A[2 * M] + rem * A[2 * M - 1]
    B[NP] = B[2 * M] + rem * B[2 * M - 1]
    scale_f = math.exp(gamma * t) / T
    v = scale_f * (A[NP] / B[NP]).real
    v_prev = scale_f * (A[2 * M] / B[2 * M]).real
    # continued-fraction change, aliasing (about tol |f|) and roundoff amplified by exp(gamma t)
    est = abs(v - v_prev) + 2.0 * tol * abs(v) + 10.0 * EPS * tol ** (-0.25) * abs(v)
    return float(v), float(est)


def invert(F: Callable, spec: InversionSpec, raise_on_failure=True):
    """Invert the transform evaluator ``F`` at ``spec.times``.

    ``F`` maps a complex array of s values to transform values.  Raises
    AccuracyError (carrying values and estimates) when any estimate exceeds
    ``spec.accuracy`` relative to its value, unless ``raise_on_failure`` is
    False, in which case ``ok`` flags the offending times.
    """
    times = np.array(spec.times)
    vals = np.empty(times.size)
    ests = np.empty(times.size)
    for i, t in enumerate(times):
        if spec.algorithm == "talbot":
            N = spec.talbot_nodes or _talbot_n(spec.accuracy)
            vals[i], ests[i] = _talbot(F, t, N)
        else:
            tol = min(max(spec.accuracy * 1e-3, 1e-14), 1e-6)
            vals[i], ests[i] = _dehoog(F, t, spec.dehoog_terms, tol, spec.dehoog_scale)
    ok = ests <= spec.accuracy * np.abs(vals)
    if raise_on_failure and not np.all(ok):
        bad = times[~ok]
        raise AccuracyError(
            f"{spec.algorithm} inversion estimate exceeds {spec.accuracy:g} at t = {bad.tolist()}",
            vals,
            ests,
        )
    return InversionResult(times, vals, ests, spec.algorithm, ok)
