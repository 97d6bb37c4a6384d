"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A parameter, configuration, or precondition check failed."""


class NumericsError(RuntimeError):
    """Base class for numerical failures (quadrature, propagation)."""


class QuadratureError(NumericsError):
    """A quadrature did not converge or produced a non-finite value."""


class PropagationError(NumericsError):
    """Grid boundary contamination detected after a spectral propagation."""
