from enum import Enum
from typing import TYPE_CHECKING, Literal, Optional, Union

from loguru import logger
from pydantic import ConfigDict

from copyspan.base import BaseModel
from copyspan.document import LineDoc
from copyspan.exceptions import MalformedOp, OutOfRange
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program

if TYPE_CHECKING:
    from copyspan.tokenizer import Tokenizer


class ResolveMode(str, Enum):
    STRICT = "strict"
    """Raise on any out-of-range or inverted copy."""

    CLIPPED = "clipped"
    """Clip copy ranges into the document and record a warning."""


class ClipWarning(BaseModel):
    """
    A copy op whose range had to be clipped into the document.
    """

    model_config = ConfigDict(frozen=True)

    op_index: int
    original: tuple[int, int]
    clipped: tuple[int, int]

    @property
    def emptied(self) -> bool:
        """
        ``True`` when clipping left an inverted range, so the op emitted nothing.
        """
        return self.clipped[0] > self.clipped[1]


class ResolveOutcome(BaseModel):
    text: str
    """The resolved output text."""

    warnings: list[ClipWarning] = []
    """Clip events, always empty in strict mode."""


class ExactMatch(BaseModel):
    model_config = ConfigDict(frozen=True)

    byte_exact: bool
    """Equal after at most one trailing newline is removed from each side."""

    trimmed: bool
    """Equal after all surrounding whitespace is stripped from both sides."""

    def __bool__(self) -> bool:
        return self.byte_exact


def _strip_one_newline(text: str) -> str:
    return text[:-1] if text.endswith("\n") else text


def _strip_gen_body(body: str) -> str:
    if body.startswith("\n"):
        body = body[1:]

    return _strip_one_newline(body)


def compare_em(candidate: str, gold: str) -> ExactMatch:
    """
    Compare a resolved output against a gold output.

    Args:
        candidate (str): The produced text.
        gold (str): The expected text.

    Returns:
        :class:`~copyspan.resolver.ExactMatch`
    """
    return ExactMatch(
        byte_exact=_strip_one_newline(candidate) == _strip_one_newline(gold),
        trimmed=candidate.strip() == gold.strip(),
    )


def _bound(
    op_index: int,
    start: int,
    end: int,
    lo: int,
    hi: int,
    mode: ResolveMode,
    unit: str,
    warnings: list[ClipWarning],
) -> Optional[tuple[int, int]]:
    """
    Check or clip ``start..end`` into ``lo..hi``. Returns ``None`` when the op
    resolves to nothing.
    """
    if lo <= start <= end <= hi:
        return start, end

    if mode is ResolveMode.STRICT:
        raise OutOfRange(
            f"Op {op_index}: {unit} range {start}-{end} is outside {lo}..{hi}."
        )

    clipped = (max(lo, min(start, hi)), max(lo, min(end, hi)))
    if start > end or hi < lo:
        clipped = (clipped[0], min(clipped[1], clipped[0] - 1))

    warning = ClipWarning(op_index=op_index, original=(start, end), clipped=clipped)
    logger.debug(f"Op {op_index}: clipped {unit} range {start}-{end} to {clipped}.")
    warnings.append(warning)
    return None if warning.emptied else clipped


def _resolve_lines(program: Program, doc: LineDoc, mode: ResolveMode) -> ResolveOutcome:
    pieces = []
    warnings: list[ClipWarning] = []
    for index, op in enumerate(program.ops):
        if isinstance(op, Gen):
            pieces.append(_strip_gen_body(op.body))
            continue

        elif not isinstance(op, CopyLines):
            raise MalformedOp(f"Op {index}: token copy in a line-granularity program.")

        span = _bound(index, op.start, op.end, 1, doc.n_lines, mode, "line", warnings)
        pieces.append("" if span is None else doc.span(*span))

    return ResolveOutcome(text="\n".join(pieces), warnings=warnings)


def _resolve_tokens(
    program: Program, doc: LineDoc, mode: ResolveMode, tokenizer: "Tokenizer"
) -> ResolveOutcome:
    doc_ids = tokenizer.encode(doc.raw)
    ids: list[int] = []
    warnings: list[ClipWarning] = []
    for index, op in enumerate(program.ops):
        if isinstance(op, Gen):
            ids.extend(tokenizer.encode(op.body))
            continue

        elif not isinstance(op, CopyTokens):
            raise MalformedOp(f"Op {index}: line copy in a token-granularity program.")

        span = _bound(index, op.start, op.end, 0, len(doc_ids) - 1, mode, "token", warnings)
        if span is not None:
            ids.extend(doc_ids[span[0] : span[1] + 1])

    # NOTE: Decoding once keeps multi-byte characters split across ops intact.
    return ResolveOutcome(text=tokenizer.decode(ids), warnings=warnings)


def resolve(
    program: Program,
    doc: Union[LineDoc, str],
    mode: Union[ResolveMode, str] = ResolveMode.STRICT,
    tokenizer: Optional["Tokenizer"] = None,
    granularity: Optional[Literal["line", "token"]] = None,
) -> ResolveOutcome:
    """
    Expand ``program`` against ``doc``.

    Line-granularity programs join their op outputs with single newlines, and
    each gen body loses at most one leading and one trailing newline.
    Token-granularity programs (any ``CopyTokens`` op, or
    ``granularity="token"``) concatenate the copied token slices with the
    encoded gen bodies and decode the result once.

    Args:
        program (:class:`~copyspan.grammar.Program`): The edit program.
        doc (:class:`~copyspan.document.LineDoc` | str): The input document.
        mode (:class:`~copyspan.resolver.ResolveMode`): Strict or clipped.
        tokenizer (Optional[:class:`~copyspan.tokenizer.Tokenizer`]): Required for
          token granularity.
        granularity (Optional[str]): Force ``"line"`` or ``"token"``. Inferred from
          the ops when omitted.

    Raises:
        :class:`~copyspan.exceptions.OutOfRange`: In strict mode, for a copy
          outside the document.
        :class:`~copyspan.exceptions.MalformedOp`: For a program that mixes line
          and token copies, or a token program without a tokenizer.

    Returns:
        :class:`~copyspan.resolver.ResolveOutcome`
    """
    doc = LineDoc.model_validate(doc)
    mode = ResolveMode(mode)
    if granularity is None:
        granularity = (
            "token" if any(isinstance(op, CopyTokens) for op in program.ops) else "line"
        )

    if granularity == "line":
        return _resolve_lines(program, doc, mode)

    elif tokenizer is None:
        raise MalformedOp("Token-granularity resolution needs a tokenizer.")

    return _resolve_tokens(program, doc, mode, tokenizer)


__all__ = [
    "ClipWarning",
    "compare_em",
    "ExactMatch",
    "resolve",
    "ResolveMode",
    "ResolveOutcome",
]
