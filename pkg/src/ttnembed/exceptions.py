"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Tensor axes or dimensions do not line up."""


class PreconditionError(ValueError):
    """An input violates a numerical precondition (unitarity, isometry, norm)."""


class TopologyError(ValueError):
    """Tree topology is malformed or does not match the object it is used with."""


class ResourceError(RuntimeError):
    """Requested dense object would exceed the supported size."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class ConfigError(ValueError):
    """Experiment configuration is invalid."""
