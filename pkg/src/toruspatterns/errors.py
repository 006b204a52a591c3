"""Exception types shared across the package."""

__all__ = [
    "TorusPatternsError",
    "ConfigError",
    "NonMonotonicProfile",
    "NoConvergence",
    "SingularJacobian",
    "NotConverged",
    "NonPositiveEigenfield",
    "ZeroField",
    "SingularSystem",
]


class TorusPatternsError(Exception):
    """Base class for all package errors."""


class ConfigError(TorusPatternsError):
    """Invalid or incomplete run configuration."""


class NonMonotonicProfile(TorusPatternsError):
    """Profile values are not strictly increasing; f cannot be tabulated."""


class NoConvergence(TorusPatternsError):
    """Newton iteration failed to reach tolerance."""

    def __init__(self, message, iterations=None, residuals=None, epsilon=None):
        super().__init__(message)
        self.iterations = iterations
        self.residuals = list(residuals) if residuals is not None else None
        self.epsilon = epsilon


class SingularJacobian(TorusPatternsError):
    """The Newton Jacobian lost invertibility (stability margin crossing zero)."""

    def __init__(self, message, epsilon=None):
        super().__init__(message)
        self.epsilon = epsilon


class NotConverged(TorusPatternsError):
    """Eigenvalue iteration failed to reach tolerance."""

    def __init__(self, message, tol=None, iterations=None):
        super().__init__(message)
        self.tol = tol
        self.iterations = iterations


class NonPositiveEigenfield(TorusPatternsError):
    """Eigen-iteration converged to a sign-changing (non-principal) mode."""


class ZeroField(TorusPatternsError):
    """An operation received an identically zero field."""


class SingularSystem(TorusPatternsError):
    """A periodic linear system was numerically singular."""
