from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from functools import cached_property
from pathlib import Path
from typing import Union

from loguru import logger
from pydantic import ConfigDict

from copyspan.base import BaseModel
from copyspan.exceptions import SchemaError, UnencodableLiteral

N_BYTE_IDS = 256


def _to_bytes(text: str) -> bytes:
    return text.encode("utf8", "surrogateescape")


def _from_bytes(data: bytes) -> str:
    return data.decode("utf8", "surrogateescape")


class Tokenizer(ABC):
    """
    Maps text to token ids and back. Implementations are immutable after
    construction and deterministic.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """
        A short identity string, e.g. ``byte`` or ``vocab:single_piece``.
        """

    @property
    @abstractmethod
    def vocab_ids(self) -> tuple[int, ...]:
        """
        Every id the tokenizer can emit, in ascending order.
        """

    @abstractmethod
    def encode(self, text: str) -> list[int]: ...

    @abstractmethod
    def decode(self, ids: Sequence[int]) -> str: ...

    def count(self, text: str) -> int:
        return len(self.encode(text)) if text else 0

    def is_lossless(self, text: str) -> bool:
        return self.decode(self.encode(text)) == text

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class ByteTokenizer(Tokenizer):
    """
    One token per UTF-8 byte. Lossless on every string, including lone
    surrogate-escaped bytes.
    """

    @property
    def name(self) -> str:
        return "byte"

    @property
    def vocab_ids(self) -> tuple[int, ...]:
        return tuple(range(N_BYTE_IDS))

    def encode(self, text: str) -> list[int]:
        return list(_to_bytes(text))

    def decode(self, ids: Sequence[int]) -> str:
        return _from_bytes(bytes(ids))


class VocabTokenizer(Tokenizer):
    """
    Greedy longest-match tokenizer over a fixed vocabulary. Ids ``0..255`` are
    reserved for raw bytes, so text the vocabulary does not cover still
    round-trips.

    Args:
        entries (dict[str, int]): Vocabulary strings mapped to their ids (``>= 256``).
        name (str): Identity string reported by :attr:`name`.
    """

    def __init__(self, entries: dict[str, int], name: str = "vocab"):
        self._name = name
        self._pieces: dict[bytes, int] = {}
        self._by_id: dict[int, bytes] = {i: bytes([i]) for i in range(N_BYTE_IDS)}
        for token, token_id in entries.items():
            if not token:
                raise SchemaError("Empty vocabulary entry.")
            elif token_id < N_BYTE_IDS:
                raise SchemaError(f"Id {token_id} for '{token}' is in the reserved byte block.")
            elif token_id in self._by_id:
                raise SchemaError(f"Duplicate id {token_id} for '{token}'.")

            self._pieces[_to_bytes(token)] = token_id
            self._by_id[token_id] = _to_bytes(token)

        self._longest = max((len(piece) for piece in self._pieces), default=1)

    @classmethod
    def from_file(cls, path: Union[Path, str], name: str = "") -> "VocabTokenizer":
        """
        Load a vocabulary file: UTF-8, one entry per line, either ``token<TAB>id``
        or a bare ``token`` (ids assigned in file order after the byte block).
        Leading spaces are part of the token, and blank lines are skipped.

        Raises:
            :class:`~copyspan.exceptions.SchemaError`: With the offending line number.
        """
        path = Path(path)
        explicit: list[tuple[int, str, int]] = []
        bare: list[tuple[int, str]] = []
        for lineno, line in enumerate(path.read_text(encoding="utf8").split("\n"), start=1):
            line = line.rstrip("\r")
            if not line:
                continue

            token, sep, raw_id = line.partition("\t")
            if not sep:
                bare.append((lineno, token))
            elif raw_id.isdigit():
                explicit.append((lineno, token, int(raw_id)))
            else:
                raise SchemaError(f"Invalid id '{raw_id}'.", line=lineno)

        entries: dict[str, int] = {}
        used: set[int] = set()
        for lineno, token, token_id in explicit:
            if token in entries or token_id in used or token_id < N_BYTE_IDS:
                raise SchemaError(f"Duplicate or reserved entry '{token}'/{token_id}.", line=lineno)

            entries[token] = token_id
            used.add(token_id)

        next_id = N_BYTE_IDS
        for lineno, token in bare:
            if token in entries:
                raise SchemaError(f"Duplicate entry '{token}'.", line=lineno)

            while next_id in used:
                next_id += 1

            entries[token] = next_id
            used.add(next_id)

        logger.debug(f"Loaded {len(entries)} vocabulary entries from '{path}'.")
        return cls(entries, name=name or f"vocab:{path.stem}")

    @property
    def name(self) -> str:
        return self._name

    @cached_property
    def vocab_ids(self) -> tuple[int, ...]:  # type: ignore[override]
        return tuple(sorted(self._by_id))

    def encode(self, text: str) -> list[int]:
        data = _to_bytes(text)
        ids = []
        pos = 0
        while pos < len(data):
            for size in range(min(self._longest, len(data) - pos), 0, -1):
                if (token_id := self._pieces.get(data[pos : pos + size])) is not None:
                    ids.append(token_id)
                    pos += size
                    break

            else:
                ids.append(data[pos])
                pos += 1

        return ids

    def decode(self, ids: Sequence[int]) -> str:
        return _from_bytes(b"".join(self._by_id[i] for i in ids))


BUNDLED_VOCABS = ("single_piece", "fragmenting")


def load_tokenizer(spec: Union[str, Tokenizer]) -> Tokenizer:
    """
    Build a tokenizer from a CLI-style spec.

    Args:
        spec (str): ``byte``, or ``vocab:<name>`` for a bundled vocabulary
          (``single_piece``, ``fragmenting``), or ``vocab:<path>`` for a file.

    Returns:
        :class:`~copyspan.tokenizer.Tokenizer`
    """
    if isinstance(spec, Tokenizer):
        return spec

    elif spec == "byte":
        return ByteTokenizer()

    kind, _, target = spec.partition(":")
    if kind != "vocab" or not target:
        raise SchemaError(f"Unknown tokenizer '{spec}'. Expected 'byte' or 'vocab:<name|path>'.")

    if target.removesuffix(".vocab") in BUNDLED_VOCABS:
        from copyspan.data import fixture_path

        name = target.removesuffix(".vocab")
        return VocabTokenizer.from_file(fixture_path(f"vocab/{name}.vocab"), name=f"vocab:{name}")

    return VocabTokenizer.from_file(target)


STRUCTURAL_LITERALS: tuple[str, ...] = (
    "<",
    "</",
    ">",
    "copy",
    "gen",
    "program",
    " lines",
    '="',
    '"/>',
    "/>",
    '"',
    "</gen>",
    "</program>",
)
"""The grammar's building blocks, each resolved to ids once per tokenizer."""

COPY_TAIL = ' lines="'
DIGITS = tuple("0123456789")
HYPHEN = "-"
QUOTE = '"'

FULL_OP_SAMPLES: tuple[str, ...] = ('<copy lines="1-3"/>', "<gen>content</gen>")


class LiteralTable(BaseModel):
    """
    Token ids of every structural literal under one tokenizer.
    """

    model_config = ConfigDict(frozen=True)

    tokenizer: str
    """Identity string of the tokenizer the table was built for."""

    literals: dict[str, tuple[int, ...]]
    """Literal text to its id sequence."""

    digits: dict[str, int]
    """Each decimal digit to its single id."""

    hyphen: int
    quote: int

    vocab: tuple[int, ...]
    """Every id the tokenizer can emit."""

    def ids(self, literal: str) -> tuple[int, ...]:
        return self.literals[literal]

    def pieces(self, literal: str) -> int:
        return len(self.literals[literal])

    @property
    def gen_close(self) -> tuple[int, ...]:
        return self.literals["</gen>"]

    @cached_property
    def digit_of(self) -> dict[int, str]:
        return {token_id: digit for digit, token_id in self.digits.items()}


def _encode_literal(tokenizer: Tokenizer, literal: str) -> tuple[int, ...]:
    ids = tuple(tokenizer.encode(literal))
    if not ids or tokenizer.decode(ids) != literal:
        raise UnencodableLiteral(f"'{literal}' does not round-trip under {tokenizer.name}.")

    return ids


def _encode_single(tokenizer: Tokenizer, literal: str) -> int:
    ids = _encode_literal(tokenizer, literal)
    if len(ids) != 1:
        raise UnencodableLiteral(
            f"'{literal}' must be a single piece under {tokenizer.name}, got {len(ids)}."
        )

    return ids[0]


def build_literal_table(tokenizer: Tokenizer) -> LiteralTable:
    """
    Resolve the structural literals to ids under ``tokenizer``.

    Raises:
        :class:`~copyspan.exceptions.UnencodableLiteral`: When a literal does not
          round-trip, or a digit, hyphen or quote is not a single piece.
    """
    literals = {lit: _encode_literal(tokenizer, lit) for lit in (*STRUCTURAL_LITERALS, COPY_TAIL)}
    return LiteralTable(
        tokenizer=tokenizer.name,
        literals=literals,
        digits={digit: _encode_single(tokenizer, digit) for digit in DIGITS},
        hyphen=_encode_single(tokenizer, HYPHEN),
        quote=_encode_single(tokenizer, QUOTE),
        vocab=tokenizer.vocab_ids,
    )


class PortabilityRow(BaseModel):
    literal: str
    pieces: dict[str, int]
    """Tokenizer name to piece count."""


class PortabilityReport(BaseModel):
    tokenizers: list[str]
    rows: list[PortabilityRow]

    @property
    def single_piece_counts(self) -> dict[str, int]:
        """
        Per tokenizer, how many of the structural literals are one piece.
        """
        shorts = [row for row in self.rows if row.literal in STRUCTURAL_LITERALS]
        return {
            name: sum(1 for row in shorts if row.pieces[name] == 1) for name in self.tokenizers
        }


def portability_report(tokenizers: Iterable[Tokenizer]) -> PortabilityReport:
    """
    Piece counts of every structural literal and two full ops under each of
    ``tokenizers``.
    """
    tokenizers = list(tokenizers)
    tables = [build_literal_table(tok) for tok in tokenizers]
    rows = [
        PortabilityRow(
            literal=lit,
            pieces={table.tokenizer: table.pieces(lit) for table in tables},
        )
        for lit in STRUCTURAL_LITERALS
    ]
    rows.extend(
        PortabilityRow(literal=op, pieces={tok.name: len(tok.encode(op)) for tok in tokenizers})
        for op in FULL_OP_SAMPLES
    )
    return PortabilityReport(tokenizers=[tok.name for tok in tokenizers], rows=rows)


__all__ = [
    "build_literal_table",
    "ByteTokenizer",
    "LiteralTable",
    "load_tokenizer",
    "portability_report",
    "PortabilityReport",
    "PortabilityRow",
    "STRUCTURAL_LITERALS",
    "Tokenizer",
    "VocabTokenizer",
]
