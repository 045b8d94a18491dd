import re
from decimal import Decimal
from typing import Annotated, Literal, NoReturn, Optional, Union

from pydantic import ConfigDict, Field, field_validator, model_validator
from pydantic_core import PydanticCustomError

from copyspan.base import BaseModel
from copyspan.exceptions import EscapeDomainViolation, MalformedProgram
from copyspan.utils import utf8_offset

PROGRAM_OPEN = "<program>"
PROGRAM_CLOSE = "</program>"
GEN_OPEN = "<gen>"
GEN_CLOSE = "</gen>"

_ENTITY_MAP = str.maketrans({"<": "⟨", ">": "⟩", "/": "․"})


class ReservedLiteral(BaseModel):
    """
    A structural substring that must never appear verbatim inside a gen body,
    paired with the entity form it is escaped to.
    """

    model_config = ConfigDict(frozen=True)

    plain: str
    """The literal as the grammar spells it, e.g. ``</gen>``."""

    entity: str
    """
    The escaped spelling: ``<`` becomes U+27E8, ``>`` becomes U+27E9 and ``/``
    becomes U+2024.
    """

    @classmethod
    def from_plain(cls, plain: str) -> "ReservedLiteral":
        return cls(plain=plain, entity=plain.translate(_ENTITY_MAP))


# NOTE: Longest-first, so `</copy>` wins over its prefix-sharing sibling `<copy`.
RESERVED_LITERALS: tuple[ReservedLiteral, ...] = tuple(
    ReservedLiteral.from_plain(p)
    for p in sorted(
        ("<copy", "</copy>", GEN_OPEN, GEN_CLOSE, PROGRAM_CLOSE), key=len, reverse=True
    )
)

_ESCAPES = {lit.plain: lit.entity for lit in RESERVED_LITERALS}
_UNESCAPES = {lit.entity: lit.plain for lit in RESERVED_LITERALS}
_ESCAPE_PATTERN = re.compile("|".join(re.escape(lit.plain) for lit in RESERVED_LITERALS))
_ENTITY_PATTERN = re.compile(
    "|".join(re.escape(e) for e in sorted(_UNESCAPES, key=len, reverse=True))
)


def escape_gen_body(text: str) -> str:
    """
    Replace every reserved literal in ``text`` with its entity form.

    Raises:
        :class:`~copyspan.exceptions.EscapeDomainViolation`: When ``text``
          already contains an entity form, which would make escaping lossy.
    """
    if found := _ENTITY_PATTERN.search(text):
        raise EscapeDomainViolation(
            f"Text already contains the entity form '{found.group()}' "
            f"at byte {utf8_offset(text, found.start())}."
        )

    return _ESCAPE_PATTERN.sub(lambda m: _ESCAPES[m.group()], text)


def unescape_gen_body(text: str) -> str:
    """
    Inverse of :func:`escape_gen_body` on its domain.
    """
    return _ENTITY_PATTERN.sub(lambda m: _UNESCAPES[m.group()], text)


def audit_reserved_literals(text: str) -> list[tuple[str, int]]:
    """
    Find every occurrence of each reserved literal in ``text``.

    Args:
        text (str): Any text, typically a gold output.

    Returns:
        list[tuple[str, int]]: ``(literal, byte offset)`` pairs ordered by offset.
        An empty list means the text can be embedded without escaping.
    """
    hits = []
    for lit in RESERVED_LITERALS:
        start = text.find(lit.plain)
        while start != -1:
            hits.append((lit.plain, utf8_offset(text, start)))
            start = text.find(lit.plain, start + 1)

    return sorted(hits, key=lambda hit: (hit[1], hit[0]))


class CopyLines(BaseModel):
    """
    Copy lines ``start`` through ``end`` (1-based, inclusive) of the input.
    """

    model_config = ConfigDict(frozen=True)

    type: Literal["copy_lines"] = "copy_lines"

    start: int
    """First line, 1-based."""

    end: int
    """Last line, 1-based and inclusive."""

    @model_validator(mode="after")
    def validate_range(self):
        if self.start < 1 or self.start > self.end:
            raise PydanticCustomError(
                f"{CopyLines.__name__}Error",
                "Line range {start}-{end} needs 1 <= start <= end.",
                dict(start=self.start, end=self.end),
            )

        return self

    def __str__(self) -> str:
        return f'<copy lines="{self.start}-{self.end}"/>'


class CopyTokens(BaseModel):
    """
    Copy input tokens ``start`` through ``end`` (0-based, inclusive).
    """

    model_config = ConfigDict(frozen=True)

    type: Literal["copy_tokens"] = "copy_tokens"

    start: int
    """First token position, 0-based."""

    end: int
    """Last token position, inclusive."""

    @model_validator(mode="after")
    def validate_range(self):
        if self.start < 0 or self.start > self.end:
            raise PydanticCustomError(
                f"{CopyTokens.__name__}Error",
                "Token range {start}-{end} needs 0 <= start <= end.",
                dict(start=self.start, end=self.end),
            )

        return self

    def __str__(self) -> str:
        return f'<copy tokens="{self.start}-{self.end}"/>'


class Gen(BaseModel):
    """
    Emit ``body`` verbatim. The body is held unescaped; escaping happens only
    when the op is serialized.
    """

    model_config = ConfigDict(frozen=True)

    type: Literal["gen"] = "gen"

    body: str
    """Raw (unescaped) generated text."""

    def __str__(self) -> str:
        return f"{GEN_OPEN}{escape_gen_body(self.body)}{GEN_CLOSE}"


Op = Annotated[Union[CopyLines, CopyTokens, Gen], Field(discriminator="type")]
CopyOp = Union[CopyLines, CopyTokens]


class Program(BaseModel):
    """
    An edit program: an ordered, non-empty list of copy and gen ops.
    """

    ops: list[Op]

    @field_validator("ops")
    @classmethod
    def validate_ops(cls, value):
        if not value:
            raise PydanticCustomError(
                f"{Program.__name__}Error", "A program needs at least one op.", {}
            )

        return value

    @property
    def copy_ops(self) -> list[CopyOp]:
        return [op for op in self.ops if not isinstance(op, Gen)]

    @property
    def gen_ops(self) -> list[Gen]:
        return [op for op in self.ops if isinstance(op, Gen)]

    def __str__(self) -> str:
        return serialize_program(self)


def serialize_program(program: Program) -> str:
    """
    Render ``program`` in canonical grammar text.

    Args:
        program (:class:`~copyspan.grammar.Program`): A valid program.

    Returns:
        str
    """
    return f"{PROGRAM_OPEN}{''.join(str(op) for op in program.ops)}{PROGRAM_CLOSE}"


_INDEX = r"([+-]?[0-9]+(?:\.[0-9]+)?)"
_COPY_PATTERN = re.compile(rf'<copy (lines|tokens)="{_INDEX}-{_INDEX}"/>')


def _index(raw: str) -> Optional[int]:
    # Signs, leading zeros and integral decimals ("+3", "007", "3.0") mean 3.
    value = Decimal(raw)
    return int(value) if value == value.to_integral_value() else None



def parse_program(text: str) -> Program:
    """
    Parse grammar text into a :class:`~copyspan.grammar.Program`. Whitespace
    around ``<program>...</program>`` is ignored; anything else outside an op is
    an error.

    Raises:
        :class:`~copyspan.exceptions.MalformedProgram`: With the byte offset of
          the first problem.
    """

    def fail(message: str, index: int) -> NoReturn:
        raise MalformedProgram(message, utf8_offset(text, index))

    pos = len(text) - len(text.lstrip())
    end = len(text.rstrip())
    if not text.startswith(PROGRAM_OPEN, pos):
        fail(f"Expected '{PROGRAM_OPEN}'", pos)

    pos += len(PROGRAM_OPEN)
    ops: list[Union[CopyLines, CopyTokens, Gen]] = []
    while True:
        if text.startswith(PROGRAM_CLOSE, pos):
            if not ops:
                fail("Empty op list", pos)

            pos += len(PROGRAM_CLOSE)
            if pos != end:
                fail(f"Unexpected text after '{PROGRAM_CLOSE}'", pos)

            return Program(ops=ops)

        elif copy_match := _COPY_PATTERN.match(text, pos):
            unit, start, stop = copy_match[1], _index(copy_match[2]), _index(copy_match[3])
            if start is None or stop is None:
                fail(f"Non-integer index in {copy_match[2]}-{copy_match[3]}", pos)
            elif unit == "lines" and not 1 <= start <= stop:
                fail(f"Invalid line range {start}-{stop}", pos)
            elif not 0 <= start <= stop:
                fail(f"Invalid token range {start}-{stop}", pos)

            ops.append(
                CopyLines(start=start, end=stop)
                if unit == "lines"
                else CopyTokens(start=start, end=stop)
            )
            pos = copy_match.end()

        elif text.startswith(GEN_OPEN, pos):
            body_start = pos + len(GEN_OPEN)
            close = text.find(GEN_CLOSE, body_start)
            if close == -1:
                fail(f"Unterminated '{GEN_OPEN}'", pos)

            ops.append(Gen(body=unescape_gen_body(text[body_start:close])))
            pos = close + len(GEN_CLOSE)

        elif text.startswith("<copy", pos):
            fail("Malformed copy op", pos)

        elif pos >= len(text):
            fail(f"Missing '{PROGRAM_CLOSE}'", pos)

        else:
            fail("Unexpected text between ops", pos)


__all__ = [
    "audit_reserved_literals",
    "CopyLines",
    "CopyOp",
    "CopyTokens",
    "escape_gen_body",
    "Gen",
    "Op",
    "parse_program",
    "Program",
    "RESERVED_LITERALS",
    "ReservedLiteral",
    "serialize_program",
    "unescape_gen_body",
]
