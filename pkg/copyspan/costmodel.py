import math
from collections.abc import Iterable, Sequence
from functools import cached_property
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from loguru import logger
from pydantic import ConfigDict, Field, ValidationError, field_validator
from pydantic_core import PydanticCustomError

from copyspan.align import (
    DEFAULT_MIN_SPANS,
    CorpusAggregates,
    SpanHistogram,
    derive_oracle_line,
    gen_text,
)
from copyspan.base import BaseModel
from copyspan.corpus import CorpusCase
from copyspan.document import LineDoc
from copyspan.exceptions import (
    CopySpanError,
    HistogramMismatch,
    NonMonotoneN,
    NoViableSpan,
    SchemaError,
)
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program
from copyspan.tokenizer import Tokenizer

_NON_MONOTONE = "NonMonotoneN"


class KernelPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(gt=0)
    """Span length in tokens."""

    ar_ms: float = Field(gt=0)
    """Wall-clock of ``n`` autoregressive decode steps."""

    pp_ms: float = Field(gt=0)
    """Wall-clock of one ``n``-token parallel prefill."""

    @property
    def s(self) -> float:
        return self.ar_ms / self.pp_ms


class KernelCurve(BaseModel):
    """
    Measured splice speedup ``s(N)`` of one model at one prefix length.
    """

    model: str
    prefix_tokens: int = Field(ge=0)
    points: list[KernelPoint]

    @field_validator("points")
    @classmethod
    def validate_points(cls, value):
        if len(value) < 2:
            raise PydanticCustomError(
                f"{KernelCurve.__name__}Error",
                "Interpolation needs at least 2 points, got {count}.",
                dict(count=len(value)),
            )

        for prev, point in zip(value, value[1:]):
            if point.n <= prev.n:
                raise PydanticCustomError(
                    _NON_MONOTONE,
                    "N must be strictly increasing ({prev} then {n}).",
                    dict(prev=prev.n, n=point.n),
                )

        return value

    @cached_property
    def _log_n(self) -> np.ndarray:
        return np.log([p.n for p in self.points])

    @cached_property
    def _s(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def n_range(self) -> tuple[int, int]:
        return self.points[0].n, self.points[-1].n

    def s(self, n: float) -> float:
        return interp_s(self, n)


def _load(model: type, source: Union[Path, str, dict]):
    try:
        if isinstance(source, dict):
            return model.model_validate(source)

        return model.model_validate_json(Path(source).read_text())

    except ValidationError as err:
        if any(e["type"] == _NON_MONOTONE for e in err.errors()):
            raise NonMonotoneN(str(err)) from err

        raise SchemaError(str(err)) from err


def load_kernel_curve(source: Union[Path, str, dict]) -> KernelCurve:
    """
    Load a kernel curve: ``{"model", "prefix_tokens", "points": [{"n", "ar_ms",
    "pp_ms"}, ...]}``.

    Raises:
        :class:`~copyspan.exceptions.NonMonotoneN`: When ``n`` does not strictly increase.
        :class:`~copyspan.exceptions.SchemaError`: For anything else that does not
          validate, including a curve with fewer than 2 points.
    """
    return _load(KernelCurve, source)


def interp_s(curve: KernelCurve, n: float) -> float:
    """
    ``s(N)`` linear in ``ln N`` between the bracketing measured points, exact at
    measured points and clamped to the end values outside the measured range.
    """
    if n < 1:
        raise ValueError(f"Span length must be at least 1, got '{n}'.")

    return float(np.interp(math.log(n), curve._log_n, curve._s))


class FixedCosts(BaseModel):
    """
    Per-op overheads in milliseconds, plus the single-token decode latency.
    """

    tau_ms: float = Field(ge=0)
    c_mask_ms: float = Field(default=0.0, ge=0)
    c_sync_ms: float = Field(default=0.0, ge=0)
    c_forced_ms: float = Field(default=0.0, ge=0)

    @property
    def per_op_ms(self) -> float:
        return self.c_mask_ms + self.c_sync_ms + self.c_forced_ms


def load_fixed_costs(source: Union[Path, str, dict]) -> FixedCosts:
    return _load(FixedCosts, source)


class ConservativeM(BaseModel):
    """Every span priced at ``s(m)``."""

    kind: Literal["m"] = "m"
    m: int = Field(default=8, ge=1)


class AspirationalNbar(BaseModel):
    """Every span priced at ``s`` of the mean span length."""

    kind: Literal["nbar"] = "nbar"


class ExactHistogram(BaseModel):
    """Each span priced at its own ``s(N)``."""

    kind: Literal["exact"] = "exact"


BoundVariant = Annotated[
    Union[ConservativeM, AspirationalNbar, ExactHistogram], Field(discriminator="kind")
]


def parse_variant(text: str) -> Union[ConservativeM, AspirationalNbar, ExactHistogram]:
    """
    ``m<k>`` (e.g. ``m8``), ``nbar`` or ``exact``.
    """
    if text == "nbar":
        return AspirationalNbar()
    elif text == "exact":
        return ExactHistogram()
    elif text.startswith("m") and text[1:].isdigit():
        return ConservativeM(m=int(text[1:]))

    raise SchemaError(f"Unknown bound variant '{text}'. Expected m<k>, nbar or exact.")


def variant_label(variant: Union[ConservativeM, AspirationalNbar, ExactHistogram]) -> str:
    return f"m{variant.m}" if isinstance(variant, ConservativeM) else variant.kind


class SpeedupBound(BaseModel):
    corpus: str = ""
    variant: BoundVariant
    value: float


def _span_cost(curve: KernelCurve, spans: Iterable[int]) -> float:
    # Empty spans cost nothing.
    return sum(n / interp_s(curve, n) for n in spans if n > 0)


def speedup_bound(
    agg: CorpusAggregates,
    hist: Optional[SpanHistogram],
    curve: KernelCurve,
    variant: Union[ConservativeM, AspirationalNbar, ExactHistogram],
) -> SpeedupBound:
    """
    Closed-form wall-clock speedup bound ``T / (T_gen + copy cost)``, where
    the copy cost is ``T_copy / s(m)``, ``T_copy / s(mean)`` or the per-span sum
    ``sum(N / s(N))``, depending on ``variant``.

    Raises:
        :class:`~copyspan.exceptions.HistogramMismatch`: For the exact variant
          without a histogram, or with one that does not sum to ``T_copy``.
    """
    if isinstance(variant, ExactHistogram):
        if hist is None:
            raise HistogramMismatch("The exact bound needs a span histogram.")
        elif hist.total != agg.copy_tokens:
            raise HistogramMismatch(
                f"Histogram sums to {hist.total}, but T_copy is {agg.copy_tokens}."
            )

    if agg.copy_tokens == 0:
        return SpeedupBound(corpus=agg.name, variant=variant, value=1.0)

    if isinstance(variant, ConservativeM):
        copy_cost = agg.copy_tokens / interp_s(curve, variant.m)
    elif isinstance(variant, AspirationalNbar):
        copy_cost = agg.copy_tokens / interp_s(curve, max(agg.mean_span, 1.0))
    else:
        copy_cost = _span_cost(curve, hist.spans)  # type: ignore[union-attr]

    return SpeedupBound(
        corpus=agg.name, variant=variant, value=agg.total / (agg.gen_tokens + copy_cost)
    )


def m_sweep(
    agg: CorpusAggregates, curve: KernelCurve, ms: Sequence[int] = DEFAULT_MIN_SPANS
) -> list[SpeedupBound]:
    return [speedup_bound(agg, None, curve, ConservativeM(m=m)) for m in ms]


def l_ar(costs: FixedCosts, total_tokens: int) -> float:
    """
    Full-regeneration latency: ``tau * T``.
    """
    return costs.tau_ms * total_tokens


def l_cad(
    gen_tokens: int,
    hist: SpanHistogram,
    op_count: int,
    costs: FixedCosts,
    curve: KernelCurve,
) -> float:
    """
    Edit-program latency: gen tokens decoded one by one, each copy span spliced
    at ``N / s(N)`` decode-equivalents, plus the fixed per-op overhead.
    ``op_count`` counts every op, gens included.
    """
    return (
        costs.tau_ms * gen_tokens
        + costs.tau_ms * _span_cost(curve, hist.spans)
        + op_count * costs.per_op_ms
    )


class AutoMCandidate(BaseModel):
    n: int
    s: float
    floor: float
    """``1 + c / (N * tau)``: the speedup a splice needs to pay its overhead."""


class AutoMReport(BaseModel):
    strict_m: int
    safe_m: Optional[int] = None
    break_even_n: Optional[int] = None
    """First N with ``s(N) > 1``."""

    threshold: float
    safe_threshold: float
    c_ms: float
    grid: Literal["measured", "integer"]
    candidates: list[AutoMCandidate]
    notes: list[str] = []


def auto_m(
    curve: KernelCurve,
    costs: FixedCosts,
    threshold: float = 1.0,
    safe_threshold: float = 1.5,
    c_ms: Optional[float] = None,
    grid: Literal["measured", "integer"] = "measured",
) -> AutoMReport:
    """
    Minimum span length worth splicing: the smallest N on the grid with
    ``s(N) > max(threshold, 1 + c / (N * tau))``. The safe variant uses
    ``safe_threshold`` instead.

    Args:
        curve (:class:`~copyspan.costmodel.KernelCurve`): Measured speedups.
        costs (:class:`~copyspan.costmodel.FixedCosts`): ``tau`` and overheads.
        threshold (float): Speedup floor of the strict variant.
        safe_threshold (float): Speedup floor of the safe variant.
        c_ms (Optional[float]): Per-op overhead. Defaults to ``c_mask + c_sync``.
        grid (str): ``measured`` points only, or every ``integer`` N in the
          measured range, interpolated.

    Raises:
        :class:`~copyspan.exceptions.NoViableSpan`: No grid point passes the
          strict test.
    """
    c = costs.c_mask_ms + costs.c_sync_ms if c_ms is None else c_ms
    lo, hi = curve.n_range
    ns = [p.n for p in curve.points] if grid == "measured" else list(range(lo, hi + 1))
    candidates = []
    for n in ns:
        floor = 1 + c / (n * costs.tau_ms) if costs.tau_ms else math.inf
        candidates.append(AutoMCandidate(n=n, s=interp_s(curve, n), floor=floor))

    def first(level: float) -> Optional[int]:
        return next((c.n for c in candidates if c.s > max(level, c.floor)), None)

    strict_m = first(threshold)
    if strict_m is None:
        raise NoViableSpan(f"No N in {lo}..{hi} beats s > {threshold} net of c = {c} ms.")

    report = AutoMReport(
        strict_m=strict_m,
        safe_m=first(safe_threshold),
        break_even_n=next((c.n for c in candidates if c.s > 1), None),
        threshold=threshold,
        safe_threshold=safe_threshold,
        c_ms=c,
        grid=grid,
        candidates=candidates,
    )
    if strict_m == ns[0]:
        head = candidates[0]
        report.notes.append(
            f"The smallest grid point N={head.n} already qualifies "
            f"(s={head.s:.3f} > floor {head.floor:.4f}), so strict m* sits at the grid edge."
        )
    if report.safe_m is None:
        report.notes.append(f"No N in {lo}..{hi} reaches s > {safe_threshold}.")

    logger.debug(f"auto-m: strict={report.strict_m} safe={report.safe_m} c={c}")
    return report


class PointerComparison(BaseModel):
    pointer_fp: float
    """Forward passes of a span-level pointer decoder."""

    cad_fp: float
    """Forward-pass equivalents of the edit-program decoder."""

    @property
    def ratio(self) -> float:
        return self.pointer_fp / self.cad_fp if self.cad_fp else 1.0


def pointer_fp_compare(
    program: Program,
    curve: KernelCurve,
    tokenizer: Tokenizer,
    doc: Union[LineDoc, str],
) -> PointerComparison:
    """
    Forward-pass count of ``program`` under a span-level pointer decoder (3 per
    copy, ``1 + g`` per gen) against this decoder (``3 + N / s(N)`` per copy,
    ``2 + g`` per gen). A splice takes at least one pass, so a copy of blank
    lines costs ``3 + 1``.
    """
    doc = LineDoc.model_validate(doc)
    pointer = cad = 0.0
    for op in program.ops:
        if isinstance(op, Gen):
            g = tokenizer.count(gen_text(op))
            pointer += 1 + g
            cad += 2 + g
            continue

        if isinstance(op, CopyTokens):
            n = op.end - op.start + 1
        else:
            n = tokenizer.count(doc.span(op.start, op.end))

        pointer += 3
        cad += 3 + max(n / interp_s(curve, n) if n > 0 else 0.0, 1.0)

    return PointerComparison(pointer_fp=pointer, cad_fp=cad)


class CombinedSpeedup(BaseModel):
    s_spec: float
    cad_only: float
    """Speedup with gen regions decoded plainly."""

    combined: float
    """Speedup with gen regions also accelerated by ``s_spec``."""


def combined_speedup(
    gen_tokens: int,
    hist: SpanHistogram,
    k_copy: int,
    k_gen: int,
    costs: FixedCosts,
    curve: KernelCurve,
    s_spec: float,
) -> CombinedSpeedup:
    """
    Speedup over full regeneration when copy spans are spliced and gen regions
    are additionally sped up ``s_spec``-fold. Per-op overheads are priced in
    decode steps (``per_op_ms / tau``).

    Raises:
        ValueError: When ``s_spec < 1``.
    """
    if s_spec < 1:
        raise ValueError(f"Speculation speedup must be at least 1, got '{s_spec}'.")

    c_fixed = costs.per_op_ms / costs.tau_ms if costs.tau_ms else 0.0
    copy_cost = k_copy * c_fixed + _span_cost(curve, hist.spans)
    full = gen_tokens + hist.total

    def speedup(gen_cost: float) -> float:
        denominator = copy_cost + k_gen * c_fixed + gen_cost
        return full / denominator if denominator else 1.0

    return CombinedSpeedup(
        s_spec=s_spec, cad_only=speedup(gen_tokens), combined=speedup(gen_tokens / s_spec)
    )


class _OracleTally(BaseModel):
    cases: int = 0
    gen_tokens: int = 0
    spans: list[int] = []
    k_gen: int = 0
    pointer_fp: float = 0.0
    cad_fp: float = 0.0


def _tally(
    corpus: Iterable[CorpusCase], tokenizer: Tokenizer, curve: KernelCurve
) -> _OracleTally:
    tally = _OracleTally()
    for case in corpus:
        doc = LineDoc(raw=case.doc)
        try:
            oracle = derive_oracle_line(doc, case.gold)
        except CopySpanError as err:
            logger.warning(f"Excluding case '{case.id}': {err}")
            continue

        tally.cases += 1
        for op in oracle.ops:
            if isinstance(op, CopyLines):
                tally.spans.append(tokenizer.count(doc.span(op.start, op.end)))
            elif isinstance(op, Gen):
                tally.gen_tokens += tokenizer.count(gen_text(op))
                tally.k_gen += 1

        comparison = pointer_fp_compare(oracle, curve, tokenizer, doc)
        tally.pointer_fp += comparison.pointer_fp
        tally.cad_fp += comparison.cad_fp

    return tally


class CorpusPointerComparison(BaseModel):
    cases: int
    pointer_mean: float
    cad_mean: float
    ratio: float
    """Ratio of the corpus sums."""


def corpus_pointer_compare(
    corpus: Iterable[CorpusCase], curve: KernelCurve, tokenizer: Tokenizer
) -> CorpusPointerComparison:
    tally = _tally(corpus, tokenizer, curve)
    n = tally.cases or 1
    return CorpusPointerComparison(
        cases=tally.cases,
        pointer_mean=tally.pointer_fp / n,
        cad_mean=tally.cad_fp / n,
        ratio=tally.pointer_fp / tally.cad_fp if tally.cad_fp else 1.0,
    )


def corpus_combined_speedup(
    corpus: Iterable[CorpusCase],
    tokenizer: Tokenizer,
    costs: FixedCosts,
    curve: KernelCurve,
    s_spec: float,
) -> CombinedSpeedup:
    """
    :func:`~copyspan.costmodel.combined_speedup` over the pooled oracle
    programs of a corpus.
    """
    tally = _tally(corpus, tokenizer, curve)
    return combined_speedup(
        tally.gen_tokens,
        SpanHistogram(spans=tally.spans),
        len(tally.spans),
        tally.k_gen,
        costs,
        curve,
        s_spec,
    )


__all__ = [
    "AspirationalNbar",
    "auto_m",
    "AutoMCandidate",
    "AutoMReport",
    "combined_speedup",
    "CombinedSpeedup",
    "ConservativeM",
    "corpus_combined_speedup",
    "corpus_pointer_compare",
    "CorpusPointerComparison",
    "ExactHistogram",
    "FixedCosts",
    "interp_s",
    "KernelCurve",
    "KernelPoint",
    "l_ar",
    "l_cad",
    "load_fixed_costs",
    "load_kernel_curve",
    "m_sweep",
    "parse_variant",
    "pointer_fp_compare",
    "PointerComparison",
    "speedup_bound",
    "SpeedupBound",
    "variant_label",
]
