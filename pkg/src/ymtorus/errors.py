"""Exception types shared across the package."""


class YMError(Exception):
    """Base class for experiment failures (CLI exit code 1)."""


class NoConvergence(YMError):
    pass


class AmbiguousKernel(YMError):
    pass


class StepRejected(YMError):
    pass


class DidNotConverge(YMError):
    """Raised when a flow hits its time limit; carries the partial result."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InsufficientDecay(YMError):
    pass


class NotNearFlat(YMError):
    pass


class NonCommuting(YMError):
    pass


class DegenerateRay(YMError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""
