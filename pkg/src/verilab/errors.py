"""Exception types shared across the package.

The CLI maps these onto its exit codes: configuration/contract problems
exit 2, file problems exit 3, numeric failures exit 4.
"""


class VerilabError(Exception):
    pass


class DimensionError(VerilabError):
    """Operand shapes do not conform."""


class NumericError(VerilabError):
    """A computation produced or received non-finite values."""


class ContractError(VerilabError):
    """A caller violated an operation's precondition."""


class ConfigError(VerilabError):
    """Invalid configuration value or combination."""


class ResourceError(VerilabError):
    """A bounded-resource budget (e.g. grid size) was exceeded."""


class ParseError(VerilabError):
    """Malformed input file. Carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
