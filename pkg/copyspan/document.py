from collections.abc import Iterator
from pathlib import Path
from typing import Union

from pydantic import model_validator

from copyspan.base import BaseModel


def split_lines(raw: str) -> list[str]:
    """
    Split ``raw`` on ``"\\n"`` only. A final newline terminates the last line
    rather than opening an empty one.
    """
    if not raw:
        return []

    lines = raw.split("\n")
    if raw.endswith("\n"):
        lines.pop()

    return lines


class LineDoc(BaseModel):
    """
    An input document indexed by lines. Line numbers are 1-based everywhere
    in the public API, matching the ``<copy lines="i-j"/>`` grammar.
    """

    raw: str
    """The full text, byte-exact."""

    lines: tuple[str, ...] = ()
    """The lines of ``raw``, always recomputed from it."""

    @model_validator(mode="before")
    @classmethod
    def validate_raw(cls, value):
        if isinstance(value, Path):
            value = value.read_text(encoding="utf8")

        if isinstance(value, str):
            raw = value
        elif isinstance(value, dict):
            raw = value.get("raw", "")
        elif isinstance(value, LineDoc):
            raw = value.raw
        else:
            return value

        return {"raw": raw, "lines": tuple(split_lines(raw))}

    @classmethod
    def from_file(cls, path: Union[Path, str]) -> "LineDoc":
        return cls.model_validate(Path(path))

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def text(self) -> str:
        """
        The lines joined by single newlines (``raw`` without its final newline).
        """
        return "\n".join(self.lines)

    def span(self, start: int, end: int) -> str:
        """
        The text of lines ``start`` through ``end`` (1-based, inclusive), joined
        by newlines. Indices outside the document contribute nothing.
        """
        return "\n".join(self.lines[max(start, 1) - 1 : max(end, 0)])

    def __getitem__(self, lineno: Union[int, slice]) -> Union[str, list[str]]:
        if isinstance(lineno, int):
            if not 1 <= lineno <= self.n_lines:
                raise IndexError(f"Line {lineno} outside 1..{self.n_lines}.")

            return self.lines[lineno - 1]

        start = 1 if lineno.start is None else lineno.start
        stop = self.n_lines + 1 if lineno.stop is None else lineno.stop
        return list(self.lines[max(start, 1) - 1 : max(stop - 1, 0)])

    def __iter__(self) -> Iterator[str]:  # type: ignore[override]
        return iter(self.lines)

    def __len__(self) -> int:
        return self.n_lines

    def __repr__(self) -> str:
        return f"<LineDoc lines={self.n_lines}>"
