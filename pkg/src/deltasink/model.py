"""Problem definition: diffusion coefficient, sink law, initial density, grids.

The governing equation is

    dP/dt = D d2P/dx2 - 2 k(t) delta(x) P,

with ``k(t) >= 0`` meaning absorption at the origin.  Equivalently P obeys the
free diffusion equation away from x = 0 together with the jump condition
``D [P_x(0+, t) - P_x(0-, t)] = 2 k(t) P(0, t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, Issue, UnsupportedQueryError, ValidationError

# Gaussian initial densities count as vanishing at the origin beyond this many
# widths; exp(-32) < 1e-14 of the peak.
GAUSSIAN_ORIGIN_WIDTHS = 8.0


# --------------------------------------------------------------------------
# sink laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroSink:
    kind = "zero"

    def rate(self, t):
        return np.zeros_like(t, dtype=float)


@dataclass(frozen=True)
class ConstantSink:
    """k(t) = k0."""

    k0: float
    kind = "constant"

    def rate(self, t):
        return np.full_like(t, self.k0, dtype=float)


@dataclass(frozen=True)
class LinearSink:
    """k(t) = alpha * t; alpha has units length/time**2."""

    alpha: float
    kind = "linear"

    def rate(self, t):
        return self.alpha * t


@dataclass(frozen=True)
class InverseTimeSink:
    """k(t) = alpha / t; alpha is a length.

    Only meaningful for initial densities that vanish at the origin.
    """

    alpha: float
    kind = "inverse_time"

    def rate(self, t):
        return self.alpha / t


@dataclass(frozen=True)
class ExponentialSink:
    """k(t) = beta * exp(-decay * t)."""

    beta: float
    decay: float
    kind = "exponential"

    def rate(self, t):
        return self.beta * np.exp(-self.decay * t)


@dataclass(frozen=True)
class TabulatedSink:
    """Piecewise-linear k(t) through (time, rate) knots, clamped outside."""

    times: tuple
    rates: tuple
    kind = "tabulated"

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(v) for v in self.times))
        object.__setattr__(self, "rates", tuple(float(v) for v in self.rates))

    def rate(self, t):
        return np.interp(t, self.times, self.rates)


SinkModel = Union[
    ZeroSink, ConstantSink, LinearSink, InverseTimeSink, ExponentialSink, TabulatedSink
]


# --------------------------------------------------------------------------
# initial conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaAt:
    """P(x, 0) = delta(x - x0)."""

    x0: float
    kind = "delta"


@dataclass(frozen=True)
class Gaussian:
    """Unit-mass normal density."""

    center: float
    width: float
    kind = "gaussian"

    def density(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.exp(-0.5 * z * z) / (self.width * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class TabulatedIC:
    """Piecewise-linear density on a strictly increasing x grid.

    Values are rescaled at construction so the trapezoid mass is one; the
    density is zero outside the table.
    """

    x: tuple
    density: tuple
    kind = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        rho = np.asarray(self.density, dtype=float)
        if x.ndim != 1 or x.shape != rho.shape or x.size < 2:
            raise DomainError("tabulated initial condition needs matching 1-D arrays of length >= 2")
        if not np.all(np.diff(x) > 0):
            raise DomainError("tabulated initial condition x must be strictly increasing")
        mass = float(trapezoid(rho, x))
        if not mass > 0 or not math.isfinite(mass):
            raise DomainError("tabulated initial condition must have positive finite mass")
        object.__setattr__(self, "x", tuple(x.tolist()))
        object.__setattr__(self, "density", tuple((rho / mass).tolist()))

    def arrays(self):
        return np.asarray(self.x), np.asarray(self.density)

    def evaluate(self, x):
        xs, rho = self.arrays()
        return np.interp(x, xs, rho, left=0.0, right=0.0)


InitialCondition = Union[DeltaAt, Gaussian, TabulatedIC]


@dataclass(frozen=True)
class Problem:
    diffusion_coefficient: float
    sink: SinkModel = field(default_factory=ZeroSink)
    initial_condition: InitialCondition = field(default_factory=lambda: DeltaAt(-1.0))

    @property
    def D(self):
        return self.diffusion_coefficient


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_n = n h on [0, t_max], n = 0..n_steps."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self):
        return self.t_max / self.n_steps

    @property
    def nodes(self):
        return self.h * np.arange(self.n_steps + 1)

    def index_of(self, t, rtol=1e-9):
        """Index of the node equal to ``t``; DomainError if t is off-grid."""
        x = t / self.h
        n = int(round(x))
        if n < 0 or n > self.n_steps or abs(x - n) > rtol * max(1.0, abs(x)):
            lo = min(max(int(math.floor(x)), 0), self.n_steps)
            hi = min(lo + 1, self.n_steps)
            raise DomainError(
                f"time {t!r} is not a grid node; nearest nodes are "
                f"{lo * self.h!r} and {hi * self.h!r}"
            )
        return n


@dataclass(frozen=True)
class SpaceGrid:
    """Symmetric uniform nodes on [-L, L]; an odd count puts a node at 0."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        if int(self.n_points) != self.n_points or self.n_points < 3 or self.n_points % 2 == 0:
            raise DomainError(f"n_points must be an odd integer >= 3, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def dx(self):
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def nodes(self):
        m = (self.n_points - 1) // 2
        return self.dx * np.arange(-m, m + 1)

    @property
    def origin_index(self):
        return (self.n_points - 1) // 2

    @classmethod
    def with_spacing(cls, half_width, dx):
        m = int(round(half_width / dx))
        return cls(m * dx, 2 * m + 1)


# --------------------------------------------------------------------------
# evaluation and validation
# --------------------------------------------------------------------------


def evaluate_sink(sink, t):
    """Sink strength k(t) (not 2 k(t)); accepts scalars or arrays."""
    ta = np.asarray(t, dtype=float)
    if np.any(np.isnan(ta)) or np.any(ta < 0):
        raise DomainError("sink evaluated at negative or NaN time")
    if isinstance(sink, InverseTimeSink) and np.any(ta == 0):
        raise DomainError("inverse-time sink is singular at t = 0")
    out = sink.rate(ta)
    return float(out) if np.ndim(out) == 0 else out


def evaluate_ic(ic, x):
    """Pointwise initial density; DeltaAt has none."""
    if isinstance(ic, DeltaAt):
        raise UnsupportedQueryError("a delta initial condition has no pointwise density")
    if isinstance(ic, Gaussian):
        out = ic.density(x)
    else:
        out = ic.evaluate(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def origin_density(ic):
    """Initial density at x = 0 (infinite for a delta sitting on the sink)."""
    if isinstance(ic, DeltaAt):
        return math.inf if ic.x0 == 0 else 0.0
    return float(evaluate_ic(ic, 0.0))


def _finite(*vals):
    return all(isinstance(v, (int, float, np.floating)) and math.isfinite(v) for v in vals)


def _sink_issues(sink):
    issues = []
    if isinstance(sink, ZeroSink):
        return issues
    if isinstance(sink, ConstantSink):
        params = {"k0": sink.k0}
    elif isinstance(sink, (LinearSink, InverseTimeSink)):
        params = {"alpha": sink.alpha}
    elif isinstance(sink, ExponentialSink):
        params = {"beta": sink.beta}
        if not _finite(sink.decay):
            issues.append(Issue("SINK_NONFINITE", "exponential decay must be finite"))
    elif isinstance(sink, TabulatedSink):
        t = np.asarray(sink.times)
        k = np.asarray(sink.rates)
        if t.size == 0 or t.shape != k.shape:
            issues.append(Issue("SINK_TABLE_SHAPE", "tabulated sink needs equal, non-empty time and rate lists"))
            return issues
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(k))):
            issues.append(Issue("SINK_NONFINITE", "tabulated sink contains non-finite values"))
        if np.any(np.diff(t) <= 0):
            issues.append(Issue("SINK_KNOTS_UNSORTED", "tabulated sink times must be strictly increasing"))
        if np.any(t < 0):
            issues.append(Issue("SINK_KNOTS_NEGATIVE", "tabulated sink times must be >= 0"))
        if np.any(k < 0):
            issues.append(Issue("SINK_NEGATIVE", "tabulated sink rates must be >= 0"))
        return issues
    else:
        return [Issue("SINK_UNKNOWN", f"unknown sink type {type(sink).__name__}")]
    for name, v in params.items():
        if not _finite(v):
            issues.append(Issue("SINK_NONFINITE", f"{name} must be finite"))
        elif v < 0:
            issues.append(Issue("SINK_NEGATIVE", f"{name} must be >= 0 (absorbing sinks only), got {v}"))
    return issues


def _ic_issues(ic):
    if isinstance(ic, DeltaAt):
        return [] if _finite(ic.x0) else [Issue("IC_NONFINITE", "x0 must be finite")]
    if isinstance(ic, Gaussian):
        issues = []
        if not _finite(ic.center, ic.width):
            issues.append(Issue("IC_NONFINITE", "gaussian center and width must be finite"))
        elif ic.width <= 0:
            issues.append(Issue("IC_WIDTH_NONPOSITIVE", f"gaussian width must be > 0, got {ic.width}"))
        return issues
    if isinstance(ic, TabulatedIC):
        rho = np.asarray(ic.density)
        if np.any(rho < 0):
            return [Issue("IC_NEGATIVE_DENSITY", "tabulated densities must be >= 0")]
        return []
    return [Issue("IC_UNKNOWN", f"unknown initial condition type {type(ic).__name__}")]


def _vanishes_at_origin(ic):
    if isinstance(ic, DeltaAt):
        return ic.x0 != 0
    if isinstance(ic, Gaussian):
        return abs(ic.center) >= GAUSSIAN_ORIGIN_WIDTHS * ic.width
    return float(ic.evaluate(0.0)) == 0.0


def problem_issues(p):
    """List every violated invariant of ``p`` (empty when valid)."""
    issues = []
    D = p.diffusion_coefficient
    if not _finite(D):
        issues.append(Issue("D_NONFINITE", "diffusion coefficient must be finite"))
    elif D <= 0:
        issues.append(Issue("D_NONPOSITIVE", f"diffusion coefficient must be > 0, got {D}"))
    issues += _sink_issues(p.sink)
    ic_issues = _ic_issues(p.initial_condition)
    issues += ic_issues
    if isinstance(p.sink, InverseTimeSink) and not ic_issues:
        if not _vanishes_at_origin(p.initial_condition):
            issues.append(
                Issue(
                    "IC_AT_ORIGIN",
                    "inverse-time sink requires an initial density vanishing at x = 0",
                )
            )
    return issues


def validate_problem(p):
    """Return ``p`` unchanged if valid, otherwise raise ValidationError."""
    issues = problem_issues(p)
    if issues:
        raise ValidationError(issues)
    return p
