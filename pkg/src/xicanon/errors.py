"""Exception hierarchy shared by every module."""

from __future__ import annotations


class XiCanonError(Exception):
    """Base class for all library errors."""


class PoleError(XiCanonError, ArithmeticError):
    """Evaluation hit a pole (or a zero of a denominator) within tolerance."""


class RangeError(XiCanonError, IndexError):
    """An index fell outside a precomputed table."""


class DomainError(XiCanonError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NonFiniteError(XiCanonError, ArithmeticError):
    """A NaN or infinity was produced where a finite value was required."""


class ConvergenceError(XiCanonError, ArithmeticError):
    """A truncation or tail estimate exceeded the requested tolerance."""


class RegimeError(XiCanonError, ValueError):
    """The requested parameter lies outside the supported regime."""


class SingularError(XiCanonError, ArithmeticError):
    """A determinant that must be positive was not."""


class TruncationError(XiCanonError, ArithmeticError):
    """A series tail bound exceeded the requested tolerance."""


class SolveError(XiCanonError, ArithmeticError):
    """A linear system was too ill-conditioned to trust."""


class StepError(XiCanonError, ArithmeticError):
    """Adaptive step control failed to meet its tolerance."""


class ContourError(XiCanonError, ArithmeticError):
    """A contour passed too close to a zero of the integrand's denominator."""


class ConfigError(XiCanonError, ValueError):
    """Invalid command-line or run configuration."""
