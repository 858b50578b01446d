"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
transport problems exit 3, numeric failures exit 4.
"""


class CfrlError(Exception):
    """Base class for all package errors."""


class ConfigError(CfrlError):
    """Bad user input: missing files, malformed schemas, invalid parameters."""


class CsvParseError(ConfigError):
    """A CSV cell or header failed to parse; message names row and column."""


class TransportError(CfrlError):
    """A remote predictor could not be reached or broke protocol."""


class NumericError(CfrlError):
    """Non-finite values appeared where finite numbers are required."""


class NoCounterfactualError(CfrlError):
    """The training corpus contains no row with a different predicted class."""
