"""Closed-form propagators G(x, x', t) for a point sink at the origin.

All functions accept scalars or broadcastable arrays for ``x``, ``x_src`` and
``t`` and return a float for scalar input.  With X = |x| + |x'|:

free            g(x - x', t) = exp(-(x - x')^2 / 4Dt) / sqrt(4 pi D t)
constant sink   g(x - x', t) - (k0 / 2D) exp(-X^2 / 4Dt) erfcx(k0 sqrt(t/D) + X / 2 sqrt(Dt))
absorbing       g(x - x', t) - g(X, t)
inverse time    g(x - x', t) - 2 alpha / (|x'| + 2 alpha) g(X, t)        (k = alpha / t)

The erfcx form keeps the constant-sink result finite for arbitrarily strong
sinks, where exp(z^2) erfc(z) written out would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import erfcx


@dataclass(frozen=True)
class PropagatorQuery:
    """Arguments of a propagator evaluation.

    ``parameter`` is k0 for the constant sink and alpha for the inverse-time
    sink; it is ignored by the free and absorbing propagators.
    """

    x: float
    x_src: float
    t: float
    D: float = 1.0
    parameter: float = 0.0

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise DomainError(f"propagator needs finite t > 0, got {self.t}")
        if not (self.D > 0 and math.isfinite(self.D)):
            raise DomainError(f"propagator needs finite D > 0, got {self.D}")


def _prepare(x, x_src, t, D):
    x, x_src, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, x_src, t)))
    if np.any(~(t > 0)) or np.any(~np.isfinite(t)):
        raise DomainError("propagators need finite t > 0")
    if not (D > 0 and math.isfinite(D)):
        raise DomainError(f"diffusion coefficient must be finite and positive, got {D}")
    return x, x_src, t


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def _gauss(d, t, D):
    with np.errstate(under="ignore"):
        return np.exp(-d * d / (4.0 * D * t)) / np.sqrt(4.0 * math.pi * D * t)


def free_propagator(x, x_src, t, D=1.0):
    """Free heat kernel g(x - x', t)."""
    x, x_src, t = _prepare(x, x_src, t, D)
    return _out(_gauss(x - x_src, t, D))


def constant_sink_propagator(x, x_src, t, D=1.0, k0=1.0):
    """Propagator with a constant-strength sink k0 at the origin.

    Examples
    --------
    >>> round(constant_sink_propagator(0.0, -1.0, 1.0, D=1.0, k0=0.0), 6)
    0.219696
    """
    if not k0 >= 0 or not math.isfinite(k0):
        raise DomainError(f"sink strength must be finite and non-negative, got {k0}")
    x, x_src, t = _prepare(x, x_src, t, D)
    g = _gauss(x - x_src, t, D)
    if k0 == 0:
        return _out(g)
    X = np.abs(x) + np.abs(x_src)
    z = k0 * np.sqrt(t / D) + X / (2.0 * np.sqrt(D * t))
    with np.errstate(under="ignore"):
        image = (k0 / (2.0 * D)) * np.exp(-X * X / (4.0 * D * t)) * erfcx(z)
    # clip rounding: the image term never exceeds g
    return _out(np.clip(g - image, 0.0, None))


def absorbing_limit_propagator(x, x_src, t, D=1.0):
    """Infinitely strong sink: the image solution vanishing at the origin."""
    x, x_src, t = _prepare(x, x_src, t, D)
    X = np.abs(x) + np.abs(x_src)
    out = _gauss(x - x_src, t, D) - _gauss(X, t, D)
    # opposite signs give X = |x - x'| and the two terms cancel exactly
    out = np.where(np.sign(x) * np.sign(x_src) > 0, out, 0.0)
    return _out(out)


def inverse_time_propagator(x, x_src, t, D=1.0, alpha=1.0):
    """Propagator for the sink k(t) = alpha / t, source off the origin.

    The weight of the image term, 2 alpha / (|x'| + 2 alpha), is what makes
    D [Px(0+) - Px(0-)] = 2 (alpha / t) P(0, t) hold for every t.
    """
    if not alpha >= 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must be finite and non-negative, got {alpha}")
    x, x_src, t = _prepare(x, x_src, t, D)
    if np.any(x_src == 0):
        raise DomainError("inverse-time propagator needs a source away from the origin")
    ax = np.abs(x_src)
    X = np.abs(x) + ax
    w = 2.0 * alpha / (ax + 2.0 * alpha)
    return _out(_gauss(x - x_src, t, D) - w * _gauss(X, t, D))


def evaluate(kind, q: PropagatorQuery):
    """Dispatch on ``kind`` in {"free", "constant", "absorbing", "inverse_time"}."""
    if kind == "free":
        return free_propagator(q.x, q.x_src, q.t, q.D)
    if kind == "constant":
        return constant_sink_propagator(q.x, q.x_src, q.t, q.D, q.parameter)
    if kind == "absorbing":
        return absorbing_limit_propagator(q.x, q.x_src, q.t, q.D)
    if kind == "inverse_time":
        return inverse_time_propagator(q.x, q.x_src, q.t, q.D, q.parameter)
    raise DomainError(f"no closed-form propagator for {kind!r}")


def closed_form(p, x, t):
    """P(x, t) for a problem with a delta initial condition and a sink that
    has a closed-form propagator, or None when there is none.
    """
    from .model import ConstantSink, DeltaAt, InverseTimeSink, ZeroSink

    ic = p.initial_condition
    if not isinstance(ic, DeltaAt):
        return None
    if isinstance(p.sink, ZeroSink):
        return free_propagator(x, ic.x0, t, p.D)
    if isinstance(p.sink, ConstantSink):
        return constant_sink_propagator(x, ic.x0, t, p.D, p.sink.k0)
    if isinstance(p.sink, InverseTimeSink) and ic.x0 != 0:
        return inverse_time_propagator(x, ic.x0, t, p.D, p.sink.alpha)
    return None
