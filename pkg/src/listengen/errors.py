"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ListengenError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ListengenError):
    """Invalid configuration: bad keys, bad values, incompatible settings."""


class ShapeError(ConfigError):
    """Array dimensions do not line up; message names both shapes."""


class DataError(ListengenError):
    """Problems with dataset files, sequence lengths, or sample counts."""


class NumericError(ListengenError):
    """Numerical failure: non-finite loss, failed gradient check, bad state."""
