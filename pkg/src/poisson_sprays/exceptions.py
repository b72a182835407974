class DomainError(ValueError):
    """A point lies outside the chart ball."""


class ShapeError(ValueError):
    """Array dimensions do not match the chart."""


class CapabilityError(RuntimeError):
    """A required derivative evaluator is unavailable."""


class DegenerateSampleError(ArithmeticError):
    """A matrix that must be nonsingular or of full rank is not."""


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
