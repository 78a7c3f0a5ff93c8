class DeepDictError(Exception):
    """Base class for every error raised by this package."""


class DataFormatError(DeepDictError, ValueError):
    """A file or header does not follow the expected layout."""


class DimensionError(DeepDictError, ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class DegenerateDataError(DeepDictError, ValueError):
    """Input is numerically degenerate (rank deficient, all zero, ...)."""
