"""Engine exception hierarchy, mapped to CLI exit codes."""


class EnvCvaError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class ValidationError(EnvCvaError):
    """Inputs violate a declared contract (bad config, bad parameter)."""

    exit_code = 2


class DataError(EnvCvaError):
    """Input files are malformed, missing, or filter to nothing."""

    exit_code = 3


class NumericError(EnvCvaError):
    """A numerical procedure failed (calibration bracket, duality, budget)."""

    exit_code = 4
