"""Exception hierarchy shared by every facl module."""


class FaclError(Exception):
    """Base class for all errors raised by facl."""


class InvalidInputError(FaclError, ValueError):
    """An array or tensor argument has the wrong shape or non-finite values."""


class InvalidThresholdError(FaclError, ValueError):
    """Band thresholds are inconsistent with each other or with the grid."""


class ConfigurationError(FaclError, ValueError):
    """A config value, model id, tap name or file reference is invalid."""


class TrainingError(FaclError, RuntimeError):
    """Training diverged or produced a non-finite loss."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
