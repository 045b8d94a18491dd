"""
Baseline edit formats, driven from the same line-level oracle as the program
format so that every format describes the identical edit.
"""

import re
from collections.abc import Callable, Iterable, Sequence
from enum import Enum
from typing import Optional, Union

from loguru import logger
from pydantic import ConfigDict, Field

from copyspan.align import EditRegion, derive_oracle_line, edit_regions
from copyspan.base import BaseModel
from copyspan.corpus import CorpusCase
from copyspan.document import LineDoc
from copyspan.exceptions import (
    CopySpanError,
    EmptyAnchor,
    FormatConversionError,
    HunkMismatch,
    MalformedProgram,
    NoMatch,
    OutOfRange,
)
from copyspan.grammar import Program, parse_program, serialize_program
from copyspan.resolver import ResolveMode, compare_em, resolve
from copyspan.tokenizer import Tokenizer
from copyspan.utils import nearest_rank


class EditFormat(str, Enum):
    PROGRAM = "program"
    SEARCH_REPLACE = "search_replace"
    UNIFIED_DIFF = "unified_diff"
    FULL_REGENERATION = "full_regeneration"


class FailureReason(str, Enum):
    AMBIGUOUS_ANCHOR = "ambiguous-anchor"
    NO_MATCH = "no-match"
    EMPTY_ANCHOR = "empty-anchor"
    HUNK_MISMATCH = "hunk-mismatch"
    CONVERSION = "conversion"
    WRONG_EDIT = "wrong-edit"


# Search/replace


SEARCH_HEADER = "<<<<<<< SEARCH\n"
SEPARATOR = "=======\n"
REPLACE_FOOTER = ">>>>>>> REPLACE"


class SearchReplaceBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    search: str = Field(min_length=1)
    replace: str

    def __str__(self) -> str:
        search, replace = _body(self.search), _body(self.replace)
        return f"{SEARCH_HEADER}{search}{SEPARATOR}{replace}{REPLACE_FOOTER}"


class SearchReplaceScript(BaseModel):
    blocks: list[SearchReplaceBlock] = []

    def __str__(self) -> str:
        return render_search_replace(self)


class SearchReplaceOutcome(BaseModel):
    text: str
    ambiguous: list[bool] = []
    """One flag per block: its search text occurred more than once when applied."""

    @property
    def flagged(self) -> bool:
        return any(self.ambiguous)


def _body(text: str) -> str:
    return f"{text}\n" if text else ""


def _line_offsets(lines: Sequence[str]) -> list[int]:
    offsets = []
    position = 0
    for line in lines:
        offsets.append(position)
        position += len(line) + 1

    return offsets


def _char_span(region: EditRegion, lines: Sequence[str], text: str) -> tuple[int, int, str]:
    """
    The characters of ``text`` a region rewrites, and what they become.
    """
    offsets = _line_offsets(lines)
    new = "\n".join(region.lines)
    a, b = region.start, region.end
    if a == b:
        if a > 0:
            # After the newline-free end of the preceding line.
            position = offsets[a - 1] + len(lines[a - 1])
            return position, position, f"\n{new}"

        return 0, 0, f"{new}\n" if lines else new

    start = offsets[a]
    end = offsets[b - 1] + len(lines[b - 1])
    if region.lines:
        return start, end, new

    # Deletions also take one separating newline.
    if b < len(lines):
        return start, offsets[b], ""
    elif a > 0:
        return start - 1, end, ""

    return 0, len(text), ""


def _widen(text: str, start: int, end: int) -> tuple[int, int]:
    """
    Grow an empty anchor by whole lines: the preceding line if there is one,
    otherwise the following line.
    """
    while not text[start:end]:
        if start > 0:
            start = text.rfind("\n", 0, start - 1) + 1
        elif end < len(text):
            end = text.find("\n", end + 1)
            end = len(text) if end < 0 else end
        else:
            raise EmptyAnchor("Nothing in the document to anchor an insertion on.")

    return start, end


def to_search_replace(oracle: Program, doc: Union[LineDoc, str]) -> SearchReplaceScript:
    """
    One block per edit region, in document order. The search text is the
    region's original text. Pure insertions anchor on the preceding line, or on
    the following line at the top of the document.

    Raises:
        :class:`~copyspan.exceptions.EmptyAnchor`: An insertion into an empty
          document.
        :class:`~copyspan.exceptions.FormatConversionError`: The oracle is not a
          forward line program over ``doc``.
    """
    doc = LineDoc.model_validate(doc)
    text = doc.text
    blocks = []
    for region in edit_regions(oracle, doc):
        start, end, replacement = _char_span(region, doc.lines, text)
        anchor_start, anchor_end = _widen(text, start, end)
        blocks.append(
            SearchReplaceBlock(
                search=text[anchor_start:anchor_end],
                replace=text[anchor_start:start] + replacement + text[end:anchor_end],
            )
        )

    return SearchReplaceScript(blocks=blocks)


def render_search_replace(script: SearchReplaceScript) -> str:
    return "\n".join(str(block) for block in script.blocks)


def parse_search_replace(payload: str) -> SearchReplaceScript:
    """
    Parse fenced ``SEARCH`` / ``REPLACE`` blocks separated by single newlines.

    Raises:
        :class:`~copyspan.exceptions.FormatConversionError`: On a missing fence.
    """
    blocks = []
    position = 0
    while position < len(payload):
        if not payload.startswith(SEARCH_HEADER, position):
            raise FormatConversionError(f"Expected a SEARCH fence at character {position}.")

        search_start = position + len(SEARCH_HEADER)
        separator = payload.find(f"\n{SEPARATOR}", search_start)
        if separator < 0:
            raise FormatConversionError("SEARCH block without a separator.")

        replace_start = separator + 1 + len(SEPARATOR)
        if payload.startswith(REPLACE_FOOTER, replace_start):
            replace, footer = "", replace_start
        else:
            footer = payload.find(f"\n{REPLACE_FOOTER}", replace_start)
            if footer < 0:
                raise FormatConversionError("SEARCH block without a REPLACE fence.")

            replace, footer = payload[replace_start:footer], footer + 1

        blocks.append(
            SearchReplaceBlock(search=payload[search_start:separator], replace=replace)
        )
        position = footer + len(REPLACE_FOOTER)
        if payload.startswith("\n", position):
            position += 1

    return SearchReplaceScript(blocks=blocks)


def apply_search_replace(
    doc: Union[LineDoc, str], script: SearchReplaceScript
) -> SearchReplaceOutcome:
    """
    Apply blocks in order, each to the text the previous ones produced. A block
    rewrites the first occurrence of its search text.

    Raises:
        :class:`~copyspan.exceptions.NoMatch`: A block's search text is absent.
    """
    text = LineDoc.model_validate(doc).text
    ambiguous = []
    for index, block in enumerate(script.blocks):
        found = text.find(block.search)
        if found < 0:
            raise NoMatch(f"Block {index}: search text not found.", after_ambiguous=any(ambiguous))

        # Overlapping occurrences count too.
        ambiguous.append(text.find(block.search, found + 1) >= 0)
        if ambiguous[-1]:
            logger.debug(f"Block {index}: search text is ambiguous, rewriting the first match.")

        text = text[:found] + block.replace + text[found + len(block.search) :]

    return SearchReplaceOutcome(text=text, ambiguous=ambiguous)


# Unified diff


_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@$")


class Hunk(BaseModel):
    """
    One ``@@`` hunk. Starts follow the usual convention: 1-based for a non-empty
    side, the line before the change for an empty one.
    """

    model_config = ConfigDict(frozen=True)

    old_start: int = Field(ge=0)
    old_count: int = Field(ge=0)
    new_start: int = Field(ge=0)
    new_count: int = Field(ge=0)
    lines: tuple[str, ...]
    """Body lines prefixed with ``' '``, ``'-'`` or ``'+'``."""

    @property
    def header(self) -> str:
        return f"@@ -{self.old_start},{self.old_count} +{self.new_start},{self.new_count} @@"

    def __str__(self) -> str:
        return "\n".join((self.header, *self.lines))


class UnifiedDiffScript(BaseModel):
    hunks: list[Hunk] = []

    def __str__(self) -> str:
        return render_unified_diff(self)


def _start(index: int, count: int) -> int:
    return index + 1 if count else index


def _group(regions: list[EditRegion], context: int) -> list[list[EditRegion]]:
    groups: list[list[EditRegion]] = []
    for region in regions:
        if groups and region.start - groups[-1][-1].end <= 2 * context:
            groups[-1].append(region)
        else:
            groups.append([region])

    return groups


def to_unified_diff(
    oracle: Program, doc: Union[LineDoc, str], context: int = 0
) -> UnifiedDiffScript:
    """
    Hunks for the edit regions of ``oracle``, with ``context`` unchanged lines
    around each. Regions closer than ``2 * context`` lines share a hunk.

    Raises:
        :class:`~copyspan.exceptions.FormatConversionError`: The oracle is not a
          forward line program over ``doc``.
    """
    if context < 0:
        raise ValueError(f"Context must be non-negative, got '{context}'.")

    doc = LineDoc.model_validate(doc)
    hunks = []
    delta = 0
    for group in _group(edit_regions(oracle, doc), context):
        old_begin = max(0, group[0].start - context)
        old_end = min(doc.n_lines, group[-1].end + context)
        body = []
        cursor = old_begin
        new_count = 0
        for region in group:
            body.extend(f" {line}" for line in doc.lines[cursor : region.start])
            body.extend(f"-{line}" for line in doc.lines[region.start : region.end])
            body.extend(f"+{line}" for line in region.lines)
            new_count += region.start - cursor + len(region.lines)
            cursor = region.end

        body.extend(f" {line}" for line in doc.lines[cursor:old_end])
        new_count += old_end - cursor
        old_count = old_end - old_begin
        hunks.append(
            Hunk(
                old_start=_start(old_begin, old_count),
                old_count=old_count,
                new_start=_start(old_begin + delta, new_count),
                new_count=new_count,
                lines=tuple(body),
            )
        )
        delta += new_count - old_count

    return UnifiedDiffScript(hunks=hunks)


def render_unified_diff(script: UnifiedDiffScript) -> str:
    return "\n".join(str(hunk) for hunk in script.hunks)


def parse_unified_diff(payload: str) -> UnifiedDiffScript:
    """
    Parse bare ``@@`` hunks. Body lines are read until both counts are used up.

    Raises:
        :class:`~copyspan.exceptions.HunkMismatch`: A body that does not match
          its header counts, or text outside any hunk.
    """
    rows = payload.split("\n") if payload else []
    hunks = []
    index = 0
    while index < len(rows):
        match = _HUNK_HEADER.match(rows[index])
        if not match:
            if rows[index] == "" and index == len(rows) - 1:
                break

            raise HunkMismatch(f"Expected a hunk header on row {index + 1}.")

        old_start, old_count, new_start, new_count = (
            int(group) if group is not None else 1 for group in match.groups()
        )
        old_left, new_left = old_count, new_count
        body = []
        index += 1
        while old_left or new_left:
            if index >= len(rows):
                raise HunkMismatch(f"Hunk '{match.group(0)}' ends early.")

            row = rows[index]
            tag = row[:1]
            if tag == " " and old_left and new_left:
                old_left, new_left = old_left - 1, new_left - 1
            elif tag == "-" and old_left:
                old_left -= 1
            elif tag == "+" and new_left:
                new_left -= 1
            else:
                raise HunkMismatch(f"Row {index + 1} does not fit hunk '{match.group(0)}'.")

            body.append(row)
            index += 1

        hunks.append(
            Hunk(
                old_start=old_start,
                old_count=old_count,
                new_start=new_start,
                new_count=new_count,
                lines=tuple(body),
            )
        )

    return UnifiedDiffScript(hunks=hunks)


def apply_unified_diff(doc: Union[LineDoc, str], script: UnifiedDiffScript) -> str:
    """
    Apply hunks by line number, checking every context and removed line.

    Raises:
        :class:`~copyspan.exceptions.HunkMismatch`: Hunks out of order, outside the
          document, or disagreeing with its content.
    """
    doc = LineDoc.model_validate(doc)
    lines = doc.lines
    result: list[str] = []
    cursor = 0
    for hunk in script.hunks:
        begin = hunk.old_start - 1 if hunk.old_count else hunk.old_start
        if begin < cursor or begin + hunk.old_count > len(lines):
            raise HunkMismatch(f"Hunk '{hunk.header}' is outside the document or out of order.")

        result.extend(lines[cursor:begin])
        if hunk.new_start != _start(len(result), hunk.new_count):
            raise HunkMismatch(f"Hunk '{hunk.header}' has the wrong new start.")

        position = begin
        for row in hunk.lines:
            tag, content = row[:1], row[1:]
            if tag in (" ", "-"):
                if position >= len(lines) or lines[position] != content:
                    raise HunkMismatch(
                        f"Hunk '{hunk.header}' expects {content!r} at line {position + 1}."
                    )

                position += 1

            if tag in (" ", "+"):
                result.append(content)

        if position - begin != hunk.old_count:
            raise HunkMismatch(f"Hunk '{hunk.header}' does not match its old count.")

        cursor = position

    result.extend(lines[cursor:])
    return "\n".join(result)


# Head-to-head


class FormatCase(BaseModel):
    case_id: str
    tokens: int
    exact: bool
    reason: Optional[FailureReason] = None


class FormatStats(BaseModel):
    format: EditFormat
    mean_tokens: float
    median_tokens: int
    p95_tokens: int
    total_tokens: int
    rt_em: float
    """Share of cases whose payload parses, applies and equals the gold."""

    failures: int
    cases: list[FormatCase] = []

    @property
    def reasons(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for case in self.cases:
            if case.reason is not None:
                counts[case.reason.value] = counts.get(case.reason.value, 0) + 1

        return counts


class FormatReport(BaseModel):
    tokenizer: str
    context: int
    n: int
    excluded: list[str] = []
    formats: list[FormatStats]

    def stats(self, edit_format: EditFormat) -> FormatStats:
        return next(s for s in self.formats if s.format is edit_format)


# A payload renderer and its parse+apply step: (oracle, doc, gold, context) -> payload,
# and (payload, doc) -> (text, flagged).
_Renderer = Callable[[Program, LineDoc, str, int], str]
_Applier = Callable[[str, LineDoc], tuple[str, bool]]


def _apply_program(payload: str, doc: LineDoc) -> tuple[str, bool]:
    return resolve(parse_program(payload), doc, mode=ResolveMode.STRICT).text, False


def _apply_sr(payload: str, doc: LineDoc) -> tuple[str, bool]:
    outcome = apply_search_replace(doc, parse_search_replace(payload))
    return outcome.text, outcome.flagged


def _apply_ud(payload: str, doc: LineDoc) -> tuple[str, bool]:
    return apply_unified_diff(doc, parse_unified_diff(payload)), False


_FORMATS: dict[EditFormat, tuple[_Renderer, _Applier]] = {
    EditFormat.PROGRAM: (
        lambda oracle, doc, gold, context: serialize_program(oracle),
        _apply_program,
    ),
    EditFormat.SEARCH_REPLACE: (
        lambda oracle, doc, gold, context: render_search_replace(to_search_replace(oracle, doc)),
        _apply_sr,
    ),
    EditFormat.UNIFIED_DIFF: (
        lambda oracle, doc, gold, context: render_unified_diff(
            to_unified_diff(oracle, doc, context=context)
        ),
        _apply_ud,
    ),
    EditFormat.FULL_REGENERATION: (
        lambda oracle, doc, gold, context: gold,
        lambda payload, doc: (payload, False),
    ),
}

_REASONS: dict[type, FailureReason] = {
    NoMatch: FailureReason.NO_MATCH,
    EmptyAnchor: FailureReason.EMPTY_ANCHOR,
    HunkMismatch: FailureReason.HUNK_MISMATCH,
    FormatConversionError: FailureReason.CONVERSION,
    MalformedProgram: FailureReason.CONVERSION,
    OutOfRange: FailureReason.CONVERSION,
}


def run_format(
    edit_format: EditFormat,
    case: CorpusCase,
    oracle: Program,
    tokenizer: Tokenizer,
    context: int = 0,
) -> FormatCase:
    """
    Render one case in one format, count the payload, then parse, apply and
    compare against the gold.
    """
    doc = LineDoc(raw=case.doc)
    render, apply = _FORMATS[edit_format]
    tokens = 0
    try:
        payload = render(oracle, doc, case.gold, context)
        tokens = tokenizer.count(payload)
        text, flagged = apply(payload, doc)
    except CopySpanError as err:
        if isinstance(err, NoMatch) and err.after_ambiguous:
            reason = FailureReason.AMBIGUOUS_ANCHOR
        else:
            reason = _REASONS.get(type(err), FailureReason.CONVERSION)

        logger.debug(f"Case '{case.id}' failed as {edit_format.value}: {err}")
        return FormatCase(case_id=case.id, tokens=tokens, exact=False, reason=reason)

    if compare_em(text, case.gold):
        return FormatCase(case_id=case.id, tokens=tokens, exact=True)

    reason = FailureReason.AMBIGUOUS_ANCHOR if flagged else FailureReason.WRONG_EDIT
    return FormatCase(case_id=case.id, tokens=tokens, exact=False, reason=reason)


def _stats(edit_format: EditFormat, cases: list[FormatCase]) -> FormatStats:
    tokens = [case.tokens for case in cases]
    exact = sum(case.exact for case in cases)
    return FormatStats(
        format=edit_format,
        mean_tokens=sum(tokens) / len(tokens) if tokens else 0.0,
        median_tokens=nearest_rank(tokens, 50),
        p95_tokens=nearest_rank(tokens, 95),
        total_tokens=sum(tokens),
        rt_em=exact / len(cases) if cases else 1.0,
        failures=len(cases) - exact,
        cases=cases,
    )


def format_head_to_head(
    corpus: Iterable[CorpusCase],
    tokenizer: Tokenizer,
    context: int = 0,
    formats: Sequence[EditFormat] = tuple(EditFormat),
) -> FormatReport:
    """
    Drive every format from each case's line oracle: serialize, count tokens,
    parse, apply and compare with the gold. Per-case failures are recorded, not
    raised. Cases without an oracle are excluded.

    Args:
        corpus (Iterable[:class:`~copyspan.corpus.CorpusCase`]): The cases.
        tokenizer (:class:`~copyspan.tokenizer.Tokenizer`): Counts payload tokens.
        context (int): Unified-diff context lines.
        formats (Sequence[:class:`~copyspan.formats.EditFormat`]): Formats to run.

    Returns:
        :class:`~copyspan.formats.FormatReport`
    """
    results: dict[EditFormat, list[FormatCase]] = {f: [] for f in formats}
    excluded = []
    n = 0
    for case in corpus:
        try:
            oracle = derive_oracle_line(case.doc, case.gold)
        except CopySpanError as err:
            logger.warning(f"Excluding case '{case.id}': {err}")
            excluded.append(case.id)
            continue

        n += 1
        for edit_format in formats:
            results[edit_format].append(
                run_format(edit_format, case, oracle, tokenizer, context=context)
            )

    logger.info(f"Compared {len(results)} formats over {n} cases.")
    return FormatReport(
        tokenizer=tokenizer.name,
        context=context,
        n=n,
        excluded=excluded,
        formats=[_stats(f, results[f]) for f in formats],
    )


__all__ = [
    "apply_search_replace",
    "apply_unified_diff",
    "EditFormat",
    "FailureReason",
    "format_head_to_head",
    "FormatCase",
    "FormatReport",
    "FormatStats",
    "Hunk",
    "parse_search_replace",
    "parse_unified_diff",
    "render_search_replace",
    "render_unified_diff",
    "run_format",
    "SearchReplaceBlock",
    "SearchReplaceOutcome",
    "SearchReplaceScript",
    "to_search_replace",
    "to_unified_diff",
    "UnifiedDiffScript",
]
