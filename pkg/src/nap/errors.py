"""Exception hierarchy. Exit codes used by the CLI live on the classes."""


class NapError(Exception):
    exit_code = 1


class ConfigError(NapError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(NapError):
    """Malformed input data: trajectory files, grids, splits."""

    exit_code = 3


class NumericError(NapError):
    """Non-finite values or a failed numeric precondition."""

    exit_code = 4


class CompatibilityError(NapError):
    """Checkpoint and configuration do not match."""

    exit_code = 5


class ShapeError(NapError):
    """Operand shapes do not conform."""

    exit_code = 1
