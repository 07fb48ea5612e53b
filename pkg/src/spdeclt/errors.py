"""Exception types raised across the package."""


class SpdeCltError(Exception):
    """Base class for all package errors."""


class ConfigError(SpdeCltError, ValueError):
    """Invalid configuration; ``field`` names the offending entry when known."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ShapeError(SpdeCltError, ValueError):
    pass


class DomainError(SpdeCltError, ValueError):
    pass


class ValidationError(SpdeCltError, ValueError):
    pass


class InsufficientDataError(SpdeCltError, ValueError):
    pass


class DegenerateSampleError(SpdeCltError, ValueError):
    pass


class SchemaError(SpdeCltError, ValueError):
    pass
