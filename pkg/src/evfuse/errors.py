"""Exception hierarchy shared by every evfuse module."""


class EvfuseError(Exception):
    """Base class for all evfuse errors."""


class DimensionError(EvfuseError, ValueError):
    """Array shapes do not agree."""


class DomainError(EvfuseError, ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""


class InsufficientFramesError(EvfuseError, ValueError):
    pass


class PartitionError(EvfuseError, ValueError):
    """A frame grouping does not partition the available transitions."""


class UnsupportedModeError(EvfuseError, ValueError):
    pass


class OrderingError(EvfuseError, ValueError):
    """Events are not sorted by timestamp."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ParameterError(EvfuseError, ValueError):
    pass


class ConsistencyError(EvfuseError, ValueError):
    """Observation, events and target frame count disagree."""


class DivergenceError(EvfuseError, ArithmeticError):
    def __init__(self, epoch, value):
        super().__init__(f"objective became non-finite ({value}) at epoch {epoch}")
        self.epoch = epoch
        self.value = value


class ParseError(EvfuseError, ValueError):
    """Malformed text input; carries the 1-based line number and offending field."""

    def __init__(self, message, line=None, field=None):
        where = "" if line is None else f"line {line}: "
        super().__init__(f"{where}{message}")
        self.line = line
        self.field = field


class BoundsError(ParseError):
    pass


class FormatError(EvfuseError, ValueError):
    """Binary or image container has the wrong magic, version or header."""


class LengthError(FormatError):
    """Payload is shorter or longer than its header declares."""


class ConfigError(EvfuseError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigRangeWarning(UserWarning):
    """A configuration value lies outside its recommended sampling range."""
