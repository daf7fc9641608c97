"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class RCSLabError(Exception):
    exit_code = 1


class ValidationError(RCSLabError, ValueError):
    """Malformed input or parameter outside its documented range."""

    exit_code = 2


class ResourceError(RCSLabError):
    """Requested problem size exceeds a configured guard."""

    exit_code = 3


class DecodeError(RCSLabError):
    """Interpolation or decoding could not produce a consistent polynomial."""

    exit_code = 4
