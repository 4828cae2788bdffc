"""Exception types shared across the package."""


class VaecommError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatchError(VaecommError, ValueError):
    """Operands or parameters with incompatible shapes."""


class DomainError(VaecommError, ValueError):
    """Value outside the mathematical domain of an operation."""


class DegenerateSignalError(VaecommError, ValueError):
    """Signal power too small to normalize."""


class ConfigError(VaecommError, ValueError):
    """Invalid system or run configuration."""


class CheckpointError(VaecommError, ValueError):
    """Checkpoint file missing, malformed, or inconsistent."""


class TrainingDivergedError(VaecommError, RuntimeError):
    """Non-finite values appeared during training."""


class NonDeterministicFunctionError(VaecommError, RuntimeError):
    """A function expected to be deterministic returned differing values."""
