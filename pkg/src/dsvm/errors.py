"""Exception types shared across the package."""


class DSVMError(Exception):
    """Base class for all package errors."""


class GraphInvariantError(DSVMError):
    """A digraph failed one of its structural checks.

    ``check`` names the failed invariant (``"nonnegative"``, ``"diagonal"``,
    ``"row_sum"``, ``"weight_balanced"``, ``"strongly_connected"``).
    """

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class DimensionError(DSVMError, ValueError):
    pass


class IntegrationDiverged(DSVMError):
    """State became non-finite or exceeded the divergence guard."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InvariantViolation(DSVMError):
    """A monitored invariant failed while running in strict mode."""


class NumericalFailure(DSVMError):
    pass


class NonConvergence(DSVMError):
    """An iterative solver hit its iteration cap.

    The last iterate is kept on ``last`` so callers can inspect it.
    """

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class InvalidSpectrum(DSVMError, ValueError):
    pass


class ConfigError(DSVMError, ValueError):
    """Bad configuration value; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
