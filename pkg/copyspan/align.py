from collections.abc import Hashable, Iterable, Sequence
from pathlib import Path
from typing import Optional, Union

from loguru import logger
from pydantic import ConfigDict, Field, ValidationError, model_validator
from pydantic_core import PydanticCustomError

from copyspan.base import BaseModel
from copyspan.corpus import CorpusCase, EditType
from copyspan.document import LineDoc
from copyspan.exceptions import (
    CopySpanError,
    DegenerateCase,
    FormatConversionError,
    LossyTokenization,
    SchemaError,
)
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program
from copyspan.tokenizer import Tokenizer
from copyspan.utils import nearest_rank

DEFAULT_MIN_SPANS = (1, 2, 4, 8, 16, 32)


class MatchBlock(BaseModel):
    """
    ``source[a:a+size] == target[b:b+size]``.
    """

    model_config = ConfigDict(frozen=True)

    a: int
    b: int
    size: int


def _longest_match(
    a: Sequence[Hashable],
    b2j: dict[Hashable, list[int]],
    alo: int,
    ahi: int,
    blo: int,
    bhi: int,
) -> tuple[int, int, int]:
    besti, bestj, bestsize = alo, blo, 0
    # j2len[j]: length of the longest match ending at a[i-1] and b[j]
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break

            k = newj2len[j] = j2len.get(j - 1, 0) + 1
            if k > bestsize:
                besti, bestj, bestsize = i - k + 1, j - k + 1, k

        j2len = newj2len

    return besti, bestj, bestsize


def matching_blocks(a: Sequence[Hashable], b: Sequence[Hashable]) -> list[MatchBlock]:
    """
    The Ratcliff-Obershelp matching blocks of ``a`` against ``b``: the longest
    common run (earliest in ``a``, then earliest in ``b``), recursively on both
    sides of it. No junk heuristic is applied, and no zero-size sentinel is
    appended.

    Args:
        a (Sequence): Source items, e.g. document lines.
        b (Sequence): Target items, e.g. gold lines.

    Returns:
        list[:class:`~copyspan.align.MatchBlock`]: Ascending in both ``a`` and ``b``.
    """
    b2j: dict[Hashable, list[int]] = {}
    for j, item in enumerate(b):
        b2j.setdefault(item, []).append(j)

    queue = [(0, len(a), 0, len(b))]
    found = []
    while queue:
        alo, ahi, blo, bhi = queue.pop()
        i, j, k = match = _longest_match(a, b2j, alo, ahi, blo, bhi)
        if k:
            found.append(match)
            if alo < i and blo < j:
                queue.append((alo, i, blo, j))
            if i + k < ahi and j + k < bhi:
                queue.append((i + k, ahi, j + k, bhi))

    found.sort()

    # Collapse blocks that touch in both sequences.
    blocks: list[MatchBlock] = []
    i1 = j1 = k1 = 0
    for i2, j2, k2 in found:
        if i1 + k1 == i2 and j1 + k1 == j2:
            k1 += k2
            continue

        if k1:
            blocks.append(MatchBlock(a=i1, b=j1, size=k1))

        i1, j1, k1 = i2, j2, k2

    if k1:
        blocks.append(MatchBlock(a=i1, b=j1, size=k1))

    return blocks


def gold_lines(gold: str) -> list[str]:
    """
    Split a gold output into the lines an oracle must reproduce. A single final
    newline is dropped (the comparators forgive it). Two or more are kept as
    empty lines so the output is exact.
    """
    lines = gold.split("\n")
    if gold.endswith("\n") and not gold.endswith("\n\n"):
        lines.pop()

    return lines


def _pad(lines: Sequence[str]) -> Gen:
    return Gen(body="\n" + "\n".join(lines) + "\n")


def derive_oracle_line(
    doc: Union[LineDoc, str], gold: str, allow_empty: bool = True
) -> Program:
    """
    Derive the line-level oracle program of ``gold`` against ``doc``: matching
    line blocks become copies, the unmatched gold lines in between become gen
    ops padded with one newline on each side.

    Args:
        doc (Union[:class:`~copyspan.document.LineDoc`, str]): The input document.
        gold (str): The target output.
        allow_empty (bool): When ``False``, an empty gold raises instead of
          producing the single empty gen.

    Raises:
        :class:`~copyspan.exceptions.DegenerateCase`: Empty gold with
          ``allow_empty=False``.

    Returns:
        :class:`~copyspan.grammar.Program`
    """
    doc = LineDoc.model_validate(doc)
    if not gold:
        if not allow_empty:
            raise DegenerateCase("Gold output is empty.")

        return Program(ops=[Gen(body="\n\n")])

    target = gold_lines(gold)
    ops: list[Union[CopyLines, Gen]] = []
    cursor = 0
    for block in matching_blocks(doc.lines, target):
        if block.b > cursor:
            ops.append(_pad(target[cursor : block.b]))

        ops.append(CopyLines(start=block.a + 1, end=block.a + block.size))
        cursor = block.b + block.size

    if cursor < len(target):
        ops.append(_pad(target[cursor:]))

    return Program(ops=ops)


def derive_oracle_token(doc: Union[LineDoc, str], gold: str, tokenizer: Tokenizer) -> Program:
    """
    Token-level oracle: the same construction over token ids. Copy ranges are
    0-based and inclusive, and gen bodies are decoded gold slices without
    padding. Resolve the result with ``granularity="token"``.

    Raises:
        :class:`~copyspan.exceptions.LossyTokenization`: When ``tokenizer`` does not
          round-trip the document or the gold.
    """
    raw = doc.raw if isinstance(doc, LineDoc) else doc
    for label, text in (("document", raw), ("gold", gold)):
        if not tokenizer.is_lossless(text):
            raise LossyTokenization(f"{tokenizer.name} does not round-trip the {label}.")

    doc_ids = tokenizer.encode(raw)
    gold_ids = tokenizer.encode(gold)
    if not gold_ids:
        return Program(ops=[Gen(body="")])

    ops: list[Union[CopyTokens, Gen]] = []
    cursor = 0
    for block in matching_blocks(doc_ids, gold_ids):
        if block.b > cursor:
            ops.append(Gen(body=tokenizer.decode(gold_ids[cursor : block.b])))

        ops.append(CopyTokens(start=block.a, end=block.a + block.size - 1))
        cursor = block.b + block.size

    if cursor < len(gold_ids):
        ops.append(Gen(body=tokenizer.decode(gold_ids[cursor:])))

    return Program(ops=ops)


def gen_text(op: Gen) -> str:
    """
    The text a gen op emits under line granularity.
    """
    body = op.body[1:] if op.body.startswith("\n") else op.body
    return body[:-1] if body.endswith("\n") else body


class EditRegion(BaseModel):
    """
    A maximal edited stretch of a document: original lines ``start..end-1``
    (0-based, possibly none) replaced by ``lines`` (possibly none).
    """

    model_config = ConfigDict(frozen=True)

    start: int
    end: int
    lines: tuple[str, ...]

    @property
    def kind(self) -> EditType:
        if self.start == self.end:
            return EditType.INSERT
        elif not self.lines:
            return EditType.DELETE

        return EditType.REPLACE


def edit_regions(program: Program, doc: Union[LineDoc, str]) -> list[EditRegion]:
    """
    The edit regions implied by a line program: the gaps between consecutive
    copy ranges, each paired with the gen text emitted in that gap.

    Raises:
        :class:`~copyspan.exceptions.FormatConversionError`: For token copies, copy
          ranges outside the document or copies that do not move strictly forward.
    """
    doc = LineDoc.model_validate(doc)
    regions = []
    cursor = 0
    pending: list[str] = []
    for index, op in enumerate(program.ops):
        if isinstance(op, Gen):
            pending.extend(gen_text(op).split("\n"))
            continue

        elif not isinstance(op, CopyLines):
            raise FormatConversionError(f"Op {index}: token copies have no line regions.")

        elif op.start - 1 < cursor or op.end > doc.n_lines:
            raise FormatConversionError(
                f"Op {index}: copy {op.start}-{op.end} is out of order or out of range."
            )

        if op.start - 1 > cursor or pending:
            regions.append(EditRegion(start=cursor, end=op.start - 1, lines=tuple(pending)))

        cursor = op.end
        pending = []

    if cursor < doc.n_lines or pending:
        regions.append(EditRegion(start=cursor, end=doc.n_lines, lines=tuple(pending)))

    return regions


def classify_edit(oracle: Program, doc: Union[LineDoc, str]) -> EditType:
    """
    Label a case from its oracle: no region is an identity edit, several disjoint
    regions are a compound edit, otherwise the kind of the single region.
    """
    regions = edit_regions(oracle, doc)
    if not regions:
        return EditType.IDENTITY
    elif len(regions) > 1:
        return EditType.COMPOUND

    return regions[0].kind


class CorpusAggregates(BaseModel):
    """
    Line-level copy statistics of one corpus. Token counts are per-op emitted
    text under one tokenizer.
    """

    name: str = ""

    n: int = Field(ge=0)
    """Number of cases included."""

    total: int = Field(alias="T", ge=0)
    copy_tokens: int = Field(alias="T_copy", ge=0)
    gen_tokens: int = Field(alias="T_gen", ge=0)
    copy_ops: int = Field(alias="K", ge=0)

    mean_span: float = Field(default=0.0, alias="mean", ge=0)
    p50_span: float = Field(default=0, alias="p50", ge=0)
    p95_span: float = Field(default=0, alias="p95", ge=0)

    excluded: list[str] = []
    """Ids of cases whose oracle could not be derived."""

    @model_validator(mode="after")
    def validate_totals(self):
        if self.total != self.copy_tokens + self.gen_tokens:
            raise PydanticCustomError(
                f"{CorpusAggregates.__name__}Error",
                "T ({total}) must equal T_copy + T_gen ({copy} + {gen}).",
                dict(total=self.total, copy=self.copy_tokens, gen=self.gen_tokens),
            )

        return self

    @property
    def f_line(self) -> float:
        """Copy fraction ``T_copy / T``, reported as 0 for an empty corpus."""
        return self.copy_tokens / self.total if self.total else 0.0


class _AggregatesFile(BaseModel):
    corpora: list[CorpusAggregates]


def load_aggregates(source: Union[Path, str, dict]) -> list[CorpusAggregates]:
    """
    Load aggregate rows from a JSON file (``{"corpora": [...]}``) or an equivalent
    dict.

    Raises:
        :class:`~copyspan.exceptions.SchemaError`
    """
    try:
        if isinstance(source, dict):
            return _AggregatesFile.model_validate(source).corpora

        return _AggregatesFile.model_validate_json(Path(source).read_text()).corpora

    except ValidationError as err:
        raise SchemaError(str(err)) from err


class SpanHistogram(BaseModel):
    """
    Copy-span token lengths, one entry per copy op, in corpus order.
    """

    spans: list[int] = []

    @property
    def count(self) -> int:
        return len(self.spans)

    @property
    def total(self) -> int:
        return sum(self.spans)


def _emitted(op: Union[CopyLines, Gen], doc: LineDoc) -> str:
    return gen_text(op) if isinstance(op, Gen) else doc.span(op.start, op.end)


def _summarize(
    name: str, n: int, spans: list[int], gen_tokens: int, excluded: list[str]
) -> CorpusAggregates:
    copy_tokens = sum(spans)
    return CorpusAggregates(
        name=name,
        n=n,
        T=copy_tokens + gen_tokens,
        T_copy=copy_tokens,
        T_gen=gen_tokens,
        K=len(spans),
        mean=copy_tokens / len(spans) if spans else 0.0,
        p50=nearest_rank(spans, 50),
        p95=nearest_rank(spans, 95),
        excluded=excluded,
    )


def line_cover_stats(
    corpus: Iterable[CorpusCase], tokenizer: Tokenizer, name: str = "corpus"
) -> tuple[CorpusAggregates, SpanHistogram]:
    """
    Line-level copy ceiling of a corpus: derive each oracle and count the tokens
    every op emits.

    Cases whose oracle cannot be derived are listed in ``excluded`` and left out
    of every total.

    Returns:
        tuple[:class:`~copyspan.align.CorpusAggregates`, :class:`~copyspan.align.SpanHistogram`]
    """
    spans: list[int] = []
    gen_tokens = 0
    included = 0
    excluded = []
    for case in corpus:
        doc = LineDoc(raw=case.doc)
        try:
            oracle = derive_oracle_line(doc, case.gold)
        except CopySpanError as err:
            logger.warning(f"Excluding case '{case.id}': {err}")
            excluded.append(case.id)
            continue

        included += 1
        for op in oracle.ops:
            count = tokenizer.count(_emitted(op, doc))  # type: ignore[arg-type]
            if isinstance(op, Gen):
                gen_tokens += count
            else:
                spans.append(count)

    return _summarize(name, included, spans, gen_tokens, excluded), SpanHistogram(spans=spans)


class CoverReport(BaseModel):
    m: int
    f: float
    """Covered fraction of gold tokens."""

    spans: list[int] = []
    """Accepted span lengths, each at least ``m``."""

    covered: int = 0
    total: int = 0

    @property
    def mean_span(self) -> float:
        return sum(self.spans) / len(self.spans) if self.spans else 0.0


def longest_matches(doc_tokens: Sequence[Hashable], gold_tokens: Sequence[Hashable]) -> list[int]:
    """
    For each gold position, the length of the longest run starting there that
    also occurs contiguously somewhere in the document.
    """
    positions: dict[Hashable, list[int]] = {}
    for p, token in enumerate(doc_tokens):
        positions.setdefault(token, []).append(p)

    result = [0] * len(gold_tokens)
    following: dict[int, int] = {}
    for i in range(len(gold_tokens) - 1, -1, -1):
        current = {p: following.get(p + 1, 0) + 1 for p in positions.get(gold_tokens[i], ())}
        result[i] = max(current.values(), default=0)
        following = current

    return result


def _greedy(longest: Sequence[int], m: int) -> CoverReport:
    spans = []
    i = 0
    while i < len(longest):
        if longest[i] >= m:
            spans.append(longest[i])
            i += longest[i]
        else:
            i += 1

    covered = sum(spans)
    total = len(longest)
    return CoverReport(
        m=m, f=covered / total if total else 0.0, spans=spans, covered=covered, total=total
    )


def greedy_token_cover(
    doc_tokens: Sequence[Hashable], gold_tokens: Sequence[Hashable], m: int
) -> CoverReport:
    """
    Greedy left-to-right cover: at each gold position take the longest run that
    also occurs in the document, keep it if it spans at least ``m`` tokens,
    otherwise leave the token uncovered and move on by one.

    The result is a lower bound on the best cover with spans of at least ``m``.
    """
    if m < 1:
        raise ValueError(f"Minimum span must be at least 1, got '{m}'.")

    return _greedy(longest_matches(doc_tokens, gold_tokens), m)


class SweepRow(BaseModel):
    m: int
    f: float
    spans: int


class TokenCoverSweep(BaseModel):
    f_line: float
    """Line-level copy fraction of the same corpus, for comparison."""

    rows: list[SweepRow]


def token_cover_sweep(
    corpus: Iterable[CorpusCase],
    tokenizer: Tokenizer,
    ms: Sequence[int] = DEFAULT_MIN_SPANS,
) -> TokenCoverSweep:
    """
    Corpus-level greedy token cover fraction for each minimum span in ``ms``.
    """
    corpus = list(corpus)
    longest = [
        longest_matches(tokenizer.encode(case.doc), tokenizer.encode(case.gold)) for case in corpus
    ]
    rows = []
    for m in ms:
        reports = [_greedy(per_case, m) for per_case in longest]
        total = sum(r.total for r in reports)
        rows.append(
            SweepRow(
                m=m,
                f=sum(r.covered for r in reports) / total if total else 0.0,
                spans=sum(len(r.spans) for r in reports),
            )
        )

    aggregates, _ = line_cover_stats(corpus, tokenizer)
    return TokenCoverSweep(f_line=aggregates.f_line, rows=rows)


class EditTypeCeiling(BaseModel):
    edit_type: EditType
    cases: int
    f_line: float
    f_token: float
    """Greedy token cover fraction at the report's minimum span."""


def ceiling_by_edit_type(
    corpus: Iterable[CorpusCase], tokenizer: Tokenizer, m: int = 8
) -> list[EditTypeCeiling]:
    """
    Line-level and token-level (greedy, minimum span ``m``) copy fractions per
    edit type. Rows follow :class:`~copyspan.corpus.EditType` order and appear
    only for types present in the corpus.
    """
    groups: dict[EditType, list[CorpusCase]] = {}
    for case in corpus:
        try:
            edit_type = classify_edit(derive_oracle_line(case.doc, case.gold), case.doc)
        except CopySpanError as err:
            logger.warning(f"Excluding case '{case.id}': {err}")
            continue

        groups.setdefault(edit_type, []).append(case)

    rows = []
    for edit_type in EditType:
        if not (cases := groups.get(edit_type)):
            continue

        sweep = token_cover_sweep(cases, tokenizer, ms=(m,))
        rows.append(
            EditTypeCeiling(
                edit_type=edit_type,
                cases=len(cases),
                f_line=sweep.f_line,
                f_token=sweep.rows[0].f,
            )
        )

    return rows


__all__ = [
    "ceiling_by_edit_type",
    "classify_edit",
    "CorpusAggregates",
    "CoverReport",
    "derive_oracle_line",
    "derive_oracle_token",
    "edit_regions",
    "EditRegion",
    "EditTypeCeiling",
    "gen_text",
    "gold_lines",
    "greedy_token_cover",
    "line_cover_stats",
    "load_aggregates",
    "longest_matches",
    "matching_blocks",
    "MatchBlock",
    "SpanHistogram",
    "token_cover_sweep",
    "TokenCoverSweep",
]
