"""Exception hierarchy shared by every module.

Each top-level class maps to a distinct CLI exit code.
"""


class SpecTempError(Exception):
    exit_code = 1


class ConfigError(SpecTempError, ValueError):
    exit_code = 2


class FormatError(SpecTempError):
    exit_code = 3


class SizeMismatchError(FormatError):
    pass


class CorruptionError(FormatError):
    pass


class ParseError(FormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateError(ParseError):
    pass


class DataError(SpecTempError):
    exit_code = 3


class NumericalError(SpecTempError):
    exit_code = 4


class DegenerateInputError(NumericalError):
    pass


class ShapeError(SpecTempError, ValueError):
    exit_code = 2
