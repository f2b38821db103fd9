"""Exception types shared across the package."""


class DepthFuseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidFrameError(DepthFuseError):
    """A keypoint frame is unusable (invalid flag set or non-finite coordinates)."""


class ModelDomainError(DepthFuseError):
    """A value falls outside the domain of the piecewise log distance model.

    Raised for pixel lengths at or below a branch asymptote, for model
    outputs that are not positive distances, and for distances that land
    in the dead band between the two branches.
    """


class PixelRangeError(DepthFuseError):
    """An inverted pixel length falls outside the physically visible range."""


class InsufficientHistoryError(DepthFuseError):
    """A history-based check was called with fewer samples than it requires."""


class OutOfBoundsError(DepthFuseError):
    """A pixel coordinate lies outside the image after rounding."""


class NoValidPixelsError(DepthFuseError):
    """A depth line sample contains no pixel with a usable depth return."""


class StreamOrderError(DepthFuseError):
    """Timestamps in a sensor stream are not strictly increasing."""


class LogParseError(DepthFuseError):
    """A sensor log file is malformed.

    Attributes:
        line: 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(DepthFuseError):
    """A configuration value or combination of values is invalid."""
