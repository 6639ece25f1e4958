"""Exception base classes shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class MaenrichError(Exception):
    exit_code = 2


class InputError(MaenrichError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class NumericalError(MaenrichError):
    """An estimator could not produce a result."""

    exit_code = 3


class NetworkError(MaenrichError):
    """Remote service unavailable, or required data not cached."""

    exit_code = 4
