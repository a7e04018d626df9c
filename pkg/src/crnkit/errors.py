"""Exception types raised across crnkit."""


class CrnkitError(Exception):
    """Base class for all library errors."""


class DimensionError(CrnkitError, ValueError):
    """Operand shapes do not conform."""


class ConfigurationError(CrnkitError, ValueError):
    """A model or stream configuration is invalid."""


class SamplingError(CrnkitError, ValueError):
    """Subset sampling is infeasible for the requested (n, k, t)."""


class ContractError(CrnkitError, ValueError):
    """An operation was called outside its precondition."""


class SegmentationError(CrnkitError, ValueError):
    """Subtitle or clip segmentation request cannot be satisfied."""


class GenerationError(CrnkitError, ValueError):
    """A synthetic task spec cannot be realised."""


class BundleFormatError(CrnkitError, ValueError):
    """A feature bundle file is malformed."""

    def __init__(self, message, entry=None):
        if entry is not None:
            message = f"{message} (entry {entry!r})"
        super().__init__(message)
        self.entry = entry
