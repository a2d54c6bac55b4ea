"""Exception types shared across the package."""


class SingularMatrix(ValueError):
    pass


class DomainError(ValueError):
    pass


class DegenerateDraw(RuntimeError):
    pass


class UnsupportedPattern(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class SizeLimit(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


class MissingMean(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
