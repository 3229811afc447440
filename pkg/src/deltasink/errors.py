"""Exception hierarchy shared by all solver modules."""

from __future__ import annotations

from dataclasses import dataclass


class DeltaSinkError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DeltaSinkError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class UnsupportedQueryError(DeltaSinkError):
    """The requested evaluation does not exist for this object."""


class NumericalBreakdownError(DeltaSinkError, ArithmeticError):
    """A discretization produced a degenerate linear system."""


class ConvergenceError(DeltaSinkError):
    """An iterative or series evaluation did not converge within its cap."""


class TruncationError(DeltaSinkError):
    """The truncated spatial domain is too small for the requested run."""


class TruncationWarning(UserWarning):
    """Density at the edge of a spatial window is not negligible."""


class AccuracyError(DeltaSinkError):
    """An error estimate exceeds the requested accuracy.

    The best available values and their estimates are carried along so a
    caller can still inspect them.
    """

    def __init__(self, message, values=None, estimates=None):
        super().__init__(message)
        self.values = values
        self.estimates = estimates


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def as_dict(self):
        return {"code": self.code, "message": self.message}


class ValidationError(DeltaSinkError, ValueError):
    """A problem definition violates one or more invariants."""

    def __init__(self, issues):
        self.issues = list(issues)
        text = "; ".join(f"{i.code}: {i.message}" for i in self.issues)
        super().__init__(text or "invalid problem")

    @property
    def codes(self):
        return [i.code for i in self.issues]
