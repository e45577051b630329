"""Exception types raised across the package."""


class DomainError(ValueError):
    """An input lies outside the domain on which a kernel is defined."""


class EigensolverError(RuntimeError):
    """The symmetric eigensolver failed (distinct from indefiniteness)."""


class HypothesisError(ValueError):
    """A configuration violates a hypothesis required by a guarantee."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration.

    ``field`` names the offending key path when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ModelFormatError(ValueError):
    """A saved model document is malformed or has an unsupported version."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
