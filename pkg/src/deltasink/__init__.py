"""One-dimensional diffusion with a time-dependent point sink at the origin.

Solves dP/dt = D P_xx - 2 k(t) delta(x) P through the integral equation for
the origin density, with closed-form, Laplace-domain and finite-difference
solutions for cross-checking.
"""

from .errors import (
    AccuracyError,
    ConvergenceError,
    DeltaSinkError,
    DomainError,
    NumericalBreakdownError,
    TruncationError,
    TruncationWarning,
    UnsupportedQueryError,
    ValidationError,
)
from .model import (
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
    validate_problem,
)
from .volterra import OriginHistory, abel_weights, free_origin_forcing, solve_origin
from .field import absorbed_flux, balance, reconstruct, snapshot, survival

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ConvergenceError",
    "DeltaSinkError",
    "DomainError",
    "NumericalBreakdownError",
    "TruncationError",
    "TruncationWarning",
    "UnsupportedQueryError",
    "ValidationError",
    "ConstantSink",
    "DeltaAt",
    "ExponentialSink",
    "Gaussian",
    "InverseTimeSink",
    "LinearSink",
    "Problem",
    "SpaceGrid",
    "TabulatedIC",
    "TabulatedSink",
    "TimeGrid",
    "ZeroSink",
    "evaluate_ic",
    "evaluate_sink",
    "validate_problem",
    "OriginHistory",
    "abel_weights",
    "free_origin_forcing",
    "solve_origin",
    "absorbed_flux",
    "balance",
    "reconstruct",
    "snapshot",
    "survival",
]
