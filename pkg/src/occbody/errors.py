"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input lies outside the mathematical domain of an operation."""


class SchemaError(ValueError):
    """A file or record is missing a field or has an ill-shaped one."""


class ValidationError(ValueError):
    """Loaded data violates a model invariant."""


class DimensionError(ValueError):
    """Array dimensions do not agree."""


class ProjectionError(ValueError):
    """A point cannot be projected (non-positive depth)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RenderError(ValueError):
    """A vertex is in front of the near plane on the perspective path."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(ValueError):
    """Invalid configuration or violated precondition."""


class DivergenceError(RuntimeError):
    """Optimization produced a non-finite loss.

    ``state`` carries the last iterate with a finite loss.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class DatasetError(OSError):
    """A dataset directory is incomplete, corrupted or of another schema version."""
