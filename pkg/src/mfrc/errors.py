"""Exception hierarchy shared across the package.

ConfigError maps to CLI exit code 2, NumericalError (and subclasses) to
exit code 3.
"""


class MfrcError(Exception):
    """Base class for all package errors."""


class ConfigError(MfrcError):
    """Invalid configuration file or field."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class EmptyNetworkError(MfrcError):
    """A construction step produced a network with no nodes or no edges."""


class EdgeFormatError(MfrcError):
    """Malformed connectome edge list (bad counts, bad fields)."""


class ShapeMismatchError(MfrcError):
    """Paired arrays have incompatible shapes."""


class SignalAlignmentError(MfrcError):
    """Drive signal grid does not match the integration grid."""


class WindowError(MfrcError):
    """Requested time window not covered by the available trajectory."""


class NumericalError(MfrcError):
    """Base class for numerical failures (CLI exit code 3)."""


class UnscalableMatrixError(NumericalError):
    """Matrix has zero spectral radius and cannot be scaled to a positive one."""


class SpectralRadiusError(NumericalError):
    """Iterative spectral-radius estimation failed to converge.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message: str, last_estimate: float | None = None):
        self.last_estimate = last_estimate
        super().__init__(message)


class DivergenceError(NumericalError):
    """A state or stage value became non-finite during integration."""

    def __init__(self, message: str, stage: int | None = None):
        self.stage = stage
        super().__init__(message)


class SingularSystemError(NumericalError):
    """Normal equations are singular; regularization beta > 0 is required."""
