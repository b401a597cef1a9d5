"""Exception hierarchy.

Input errors (bad files, unreadable data) and parameter errors (values that
violate an operation's preconditions) are kept apart because the command
line maps them to different exit codes.
"""


class NetSpectroError(Exception):
    """Base class for all package errors."""


class InputError(NetSpectroError):
    """The data handed to an operation cannot be used."""


class ParameterError(NetSpectroError, ValueError):
    """A numeric or configuration parameter is out of range."""


class EmptyTrace(InputError):
    pass


class MalformedLine(InputError):
    def __init__(self, line_no, text=""):
        self.line_no = line_no
        msg = f"malformed trace line {line_no}"
        if text:
            msg += f": {text!r}"
        super().__init__(msg)


class BadMagic(InputError):
    def __init__(self, magic):
        self.magic = magic
        super().__init__(f"unsupported capture magic 0x{magic:08x}")


class TruncatedHeader(InputError):
    pass


class NonPositivePeriod(ParameterError):
    pass


class TooFewBins(ParameterError):
    pass


class LagOutOfRange(ParameterError):
    pass


class DegenerateAcvf(ParameterError):
    pass


class SeriesTooShort(ParameterError):
    pass


class GridExceedsSeries(ParameterError):
    pass


class EmptyBand(ParameterError):
    pass


class NonPositiveInput(ParameterError):
    pass


class InvalidSpec(ParameterError):
    pass


class NoPeak(NetSpectroError):
    """A spectrum contained no peak above the noise floor."""
