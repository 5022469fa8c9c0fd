"""Exception hierarchy. Each class carries the CLI exit status it maps to."""


class SSDError(Exception):
    exit_code = 1


class MissingFileError(SSDError):
    exit_code = 3


class FormatError(SSDError):
    exit_code = 4


class DimensionMismatchError(SSDError, ValueError):
    exit_code = 5


class EmptyInputError(SSDError, ValueError):
    exit_code = 6


class InvalidDataError(SSDError, ValueError):
    exit_code = 7


class InsufficientDataError(SSDError, ValueError):
    exit_code = 8


class NumericalFailureError(SSDError, ArithmeticError):
    exit_code = 9


class NoSpeechError(SSDError, ValueError):
    exit_code = 10


class UnknownLabelError(SSDError, KeyError):
    exit_code = 11

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class AlreadyWeightedError(SSDError, ValueError):
    exit_code = 12


class DegenerateLabelsError(SSDError, ValueError):
    exit_code = 13


class ConfigError(SSDError, ValueError):
    exit_code = 14
