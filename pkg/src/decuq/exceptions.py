"""Exception hierarchy shared across the package."""


class DecuqError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DecuqError, ValueError):
    """Malformed or inconsistent user input."""


class NumericalFailureError(DecuqError, RuntimeError):
    """Linear algebra failure that survived jitter escalation."""


class InfeasibleRegionError(DecuqError, RuntimeError):
    """No feasible candidate available (region empty or too tight)."""


class DegenerateVarianceError(DecuqError, RuntimeError):
    """Output variance is zero; sensitivity indices are undefined."""


class DegenerateSampleError(DecuqError, RuntimeError):
    """Sample has zero spread in a required dimension."""
