"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class NoiselabError(Exception):
    exit_code = 1


class ConfigError(NoiselabError, ValueError):
    """Bad configuration, shape mismatch or invalid argument."""

    exit_code = 2


class NumericError(NoiselabError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 3


class RunError(NumericError):
    """A training run diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class SelectionError(NoiselabError):
    """No snapshot satisfies the requested noise rate."""

    exit_code = 4

    def __init__(self, message, nearest_accuracy=None):
        super().__init__(message)
        self.nearest_accuracy = nearest_accuracy


class IngestionError(NoiselabError):
    """A file could not be parsed; message carries the byte or line position."""

    exit_code = 5


class StatisticsError(NoiselabError):
    exit_code = 2

    def __init__(self, message, empty_classes=()):
        super().__init__(message)
        self.empty_classes = tuple(empty_classes)
