from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from copyspan.fsm import DecodeTrace
    from copyspan.grammar import Program


class CopySpanError(Exception):
    """
    Base class for every error raised by this package.
    """


class MalformedProgram(CopySpanError):
    """
    Raised when grammar text does not parse as a ``<program>``.
    """

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class EscapeDomainViolation(CopySpanError):
    """
    Raised when text handed to the escape codec already contains an entity form.
    """


class OutOfRange(CopySpanError):
    pass


class MalformedOp(CopySpanError):
    pass


class DegenerateCase(CopySpanError):
    pass


class LossyTokenization(CopySpanError):
    pass


class UnencodableLiteral(CopySpanError):
    pass


class LimitExceeded(CopySpanError):
    """
    Raised (on request) when a decode hits its op limit. The force-closed
    program and the trace are still available on the exception.
    """

    def __init__(self, message: str, program: "Program", trace: "DecodeTrace"):
        self.program = program
        self.trace = trace
        super().__init__(message)


class UnreplayableProgram(CopySpanError):
    pass


class PolicyViolation(CopySpanError):
    pass


class SchemaError(CopySpanError):
    """
    Raised when a fixture, corpus or configuration file does not validate.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"

        super().__init__(message)


class NonMonotoneN(SchemaError):
    pass


class HistogramMismatch(CopySpanError):
    pass


class NoViableSpan(CopySpanError):
    pass


class EmptyAnchor(CopySpanError):
    pass


class NoMatch(CopySpanError):
    """
    Raised when a search block's text is absent. ``after_ambiguous`` is set when
    an earlier block rewrote an ambiguous match.
    """

    def __init__(self, message: str, after_ambiguous: bool = False):
        self.after_ambiguous = after_ambiguous
        super().__init__(message)


class HunkMismatch(CopySpanError):
    pass


class FormatConversionError(CopySpanError):
    pass


__all__ = [
    "CopySpanError",
    "DegenerateCase",
    "EmptyAnchor",
    "EscapeDomainViolation",
    "FormatConversionError",
    "HistogramMismatch",
    "HunkMismatch",
    "LimitExceeded",
    "LossyTokenization",
    "MalformedOp",
    "MalformedProgram",
    "NoMatch",
    "NonMonotoneN",
    "NoViableSpan",
    "OutOfRange",
    "PolicyViolation",
    "SchemaError",
    "UnencodableLiteral",
    "UnreplayableProgram",
]
