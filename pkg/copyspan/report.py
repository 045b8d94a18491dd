"""
Report builders behind every harness command. Each builder turns plain inputs
(paths, names, numbers) into a :class:`~copyspan.report.Report` that echoes its
configuration and the hashes of every fixture it read.
"""

from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from loguru import logger

from copyspan.align import (
    DEFAULT_MIN_SPANS,
    SpanHistogram,
    ceiling_by_edit_type,
    classify_edit,
    derive_oracle_line,
    derive_oracle_token,
    line_cover_stats,
    load_aggregates,
    token_cover_sweep,
)
from copyspan.base import BaseModel
from copyspan.corpus import MINI_CORPUS, CorpusCase, EditType, SynthConfig, load_corpus
from copyspan.corpus import synth_corpus as _synth_corpus
from copyspan.corpus import write_corpus
from copyspan.costmodel import (
    auto_m,
    corpus_combined_speedup,
    corpus_pointer_compare,
    load_fixed_costs,
    load_kernel_curve,
    parse_variant,
    speedup_bound,
    variant_label,
)
from copyspan.data import fixture_path
from copyspan.document import LineDoc
from copyspan.exceptions import CopySpanError, EscapeDomainViolation, SchemaError
from copyspan.formats import format_head_to_head
from copyspan.fsm import (
    DecodeLimits,
    OracleReplayPolicy,
    RandomPolicy,
    TraceAccounting,
    run_decode,
    trace_accounting,
)
from copyspan.grammar import (
    RESERVED_LITERALS,
    CopyTokens,
    Gen,
    Program,
    audit_reserved_literals,
    escape_gen_body,
    parse_program,
    serialize_program,
    unescape_gen_body,
)
from copyspan.perturb import PerturbConfig, perturbation_study
from copyspan.resolver import ResolveMode, compare_em, resolve
from copyspan.tokenizer import build_literal_table, load_tokenizer, portability_report
from copyspan.utils import checksum_file

DEFAULT_KERNEL = "kernel_7b.json"
DEFAULT_COSTS = "costs_7b.json"
DEFAULT_AGGREGATES = "aggregates.json"
DEFAULT_TOKENIZERS = ("byte", "vocab:single_piece", "vocab:fragmenting")
RANDOM_GEN_LIMIT = 64
RANDOM_OP_LIMIT = 32


class ReportTable(BaseModel):
    title: str
    columns: list[str]
    rows: list[list[str]] = []


class CaseFailure(BaseModel):
    case_id: str
    reason: str


class Report(BaseModel):
    command: str = ""
    config: dict[str, Any] = {}
    fixtures: dict[str, str] = {}
    """Every file the command read, by the name it was given, to its sha256."""

    result: dict[str, Any] = {}
    tables: list[ReportTable] = []
    failures: list[CaseFailure] = []

    text: Optional[str] = None
    """Primary text output of the command, if it has one."""

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


class _Inputs:
    """
    Resolves fixture arguments and records what was read.
    """

    def __init__(self):
        self.hashes: dict[str, str] = {}

    def path(self, value: Union[Path, str]) -> Path:
        path = Path(value)
        if not path.is_file():
            path = fixture_path(str(value))

        self.hashes[str(value)] = checksum_file(path)
        return path

    def text(self, value: Union[Path, str]) -> str:
        return self.path(value).read_text(encoding="utf8")

    def corpus(self, value: Union[Path, str]) -> list[CorpusCase]:
        return load_corpus(self.path(MINI_CORPUS if str(value) == "mini" else value))


def _fmt(value: float, digits: int = 3) -> str:
    return f"{value:.{digits}f}"


def _ops_table(program: Program) -> ReportTable:
    rows = []
    for index, op in enumerate(program.ops):
        if isinstance(op, Gen):
            preview = op.body if len(op.body) <= 40 else f"{op.body[:37]}..."
            rows.append([str(index), "gen", repr(preview)])
        else:
            rows.append([str(index), op.type, f"{op.start}-{op.end}"])

    return ReportTable(title="Ops", columns=["#", "op", "content"], rows=rows)


_BUILDERS: dict[str, Callable[..., Report]] = {}


def _builder(command: str):
    def register(fn: Callable[..., Report]) -> Callable[..., Report]:
        _BUILDERS[command] = fn
        return fn

    return register


def commands() -> list[str]:
    return sorted(_BUILDERS)


def run_report(
    command: str, inputs: Optional[dict[str, Any]] = None, out: Optional[Union[Path, str]] = None
) -> Report:
    """
    Run one harness command and optionally write its JSON report.

    Args:
        command (str): A name from :func:`~copyspan.report.commands`.
        inputs (Optional[dict]): Keyword inputs of the command. They are echoed
          verbatim as the report ``config``.
        out (Optional[Union[Path, str]]): Where to write the canonical JSON.

    Raises:
        :class:`~copyspan.exceptions.SchemaError`: For an unknown command.

    Returns:
        :class:`~copyspan.report.Report`
    """
    if command not in _BUILDERS:
        raise SchemaError(f"Unknown command '{command}'. Expected one of {commands()}.")

    inputs = dict(inputs or {})
    fixtures = _Inputs()
    report = _BUILDERS[command](fixtures, **inputs)
    report.command = command
    report.config = {k: list(v) if isinstance(v, tuple) else v for k, v in inputs.items()}
    report.fixtures = fixtures.hashes
    if out is not None:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"{report.model_dump_json()}\n", encoding="utf8")
        logger.info(f"Wrote {command} report to '{path}'.")

    return report


@_builder("parse")
def _parse(inputs: _Inputs, program: str) -> Report:
    parsed = parse_program(inputs.text(program))
    return Report(
        result=dict(
            ops=len(parsed.ops), copy_ops=len(parsed.copy_ops), gen_ops=len(parsed.gen_ops)
        ),
        tables=[_ops_table(parsed)],
        text=serialize_program(parsed),
    )


def _has_token_copies(program: Program) -> bool:
    return any(isinstance(op, CopyTokens) for op in program.ops)


@_builder("resolve")
def _resolve(
    inputs: _Inputs, program: str, doc: str, mode: str = "strict", tokenizer: str = "byte"
) -> Report:
    parsed = parse_program(inputs.text(program))
    tok = load_tokenizer(tokenizer) if _has_token_copies(parsed) else None
    outcome = resolve(parsed, LineDoc(raw=inputs.text(doc)), mode=ResolveMode(mode), tokenizer=tok)
    table = ReportTable(
        title="Clip warnings",
        columns=["op", "original", "clipped", "emptied"],
        rows=[
            [
                str(w.op_index),
                f"{w.original[0]}-{w.original[1]}",
                f"{w.clipped[0]}-{w.clipped[1]}",
                str(w.emptied),
            ]
            for w in outcome.warnings
        ],
    )
    return Report(
        result=dict(warnings=[w.model_dump() for w in outcome.warnings]),
        tables=[table] if outcome.warnings else [],
        text=outcome.text,
    )


@_builder("oracle")
def _oracle(
    inputs: _Inputs, doc: str, gold: str, granularity: str = "line", tokenizer: str = "byte"
) -> Report:
    doc_text, gold_text = inputs.text(doc), inputs.text(gold)
    result: dict[str, Any] = {}
    if granularity == "token":
        program = derive_oracle_token(doc_text, gold_text, load_tokenizer(tokenizer))
    else:
        program = derive_oracle_line(doc_text, gold_text)
        result["edit_type"] = classify_edit(program, doc_text).value

    result.update(
        ops=len(program.ops), copy_ops=len(program.copy_ops), gen_ops=len(program.gen_ops)
    )
    return Report(result=result, tables=[_ops_table(program)], text=serialize_program(program))


@_builder("roundtrip")
def _roundtrip(
    inputs: _Inputs, corpus: str = "mini", granularity: str = "line", tokenizer: str = "byte"
) -> Report:
    tok = load_tokenizer(tokenizer)
    cases = inputs.corpus(corpus)
    failures = []
    byte_exact = trimmed = 0
    for case in cases:
        try:
            if granularity == "token":
                oracle = derive_oracle_token(case.doc, case.gold, tok)
            else:
                oracle = derive_oracle_line(case.doc, case.gold)

            parsed = parse_program(serialize_program(oracle))
            text = resolve(
                parsed, LineDoc(raw=case.doc), tokenizer=tok, granularity=granularity
            ).text
        except CopySpanError as err:
            failures.append(CaseFailure(case_id=case.id, reason=f"{type(err).__name__}: {err}"))
            continue

        em = compare_em(text, case.gold)
        byte_exact += em.byte_exact
        trimmed += em.trimmed
        if not em.byte_exact:
            failures.append(CaseFailure(case_id=case.id, reason="not byte-exact"))

    n = len(cases)
    rate = byte_exact / n if n else 1.0
    return Report(
        result=dict(n=n, byte_exact=byte_exact, trimmed=trimmed, rate=rate),
        tables=[
            ReportTable(
                title=f"Round trip ({granularity})",
                columns=["cases", "byte-exact", "trimmed", "rate"],
                rows=[[str(n), str(byte_exact), str(trimmed), f"{rate:.2%}"]],
            )
        ],
        failures=failures,
    )


@_builder("ceiling")
def _ceiling(
    inputs: _Inputs,
    corpus: str = "mini",
    tokenizer: str = "byte",
    level: str = "line",
    min_spans: Sequence[int] = (8,),
) -> Report:
    tok = load_tokenizer(tokenizer)
    cases = inputs.corpus(corpus)
    aggregates, _ = line_cover_stats(cases, tok, name=str(corpus))
    failures = [CaseFailure(case_id=c, reason="no oracle") for c in aggregates.excluded]
    if level == "token":
        sweep = token_cover_sweep(cases, tok, ms=list(min_spans) or DEFAULT_MIN_SPANS)
        return Report(
            result=sweep.model_dump(),
            tables=[
                ReportTable(
                    title=f"Token-level ceiling (line f = {_fmt(sweep.f_line)})",
                    columns=["m", "f", "spans"],
                    rows=[[str(r.m), _fmt(r.f), str(r.spans)] for r in sweep.rows],
                )
            ],
            failures=failures,
        )

    by_type = ceiling_by_edit_type(cases, tok, m=min_spans[0] if min_spans else 8)
    summary = ReportTable(
        title="Line-level ceiling",
        columns=["n", "T", "T_copy", "T_gen", "K", "f", "mean", "p50", "p95"],
        rows=[
            [
                str(aggregates.n),
                str(aggregates.total),
                str(aggregates.copy_tokens),
                str(aggregates.gen_tokens),
                str(aggregates.copy_ops),
                _fmt(aggregates.f_line),
                _fmt(aggregates.mean_span, 1),
                str(aggregates.p50_span),
                str(aggregates.p95_span),
            ]
        ],
    )
    breakdown = ReportTable(
        title="By edit type",
        columns=["type", "cases", "f line", "f token"],
        rows=[[r.edit_type.value, str(r.cases), _fmt(r.f_line), _fmt(r.f_token)] for r in by_type],
    )
    return Report(
        result=dict(
            aggregates=aggregates.model_dump(), by_edit_type=[r.model_dump() for r in by_type]
        ),
        tables=[summary, breakdown],
        failures=failures,
    )


@_builder("bounds")
def _bounds(
    inputs: _Inputs,
    kernel: str = DEFAULT_KERNEL,
    aggregates: str = DEFAULT_AGGREGATES,
    variant: str = "m8",
    histogram: Optional[str] = None,
    corpus: Optional[str] = None,
    tokenizer: str = "byte",
) -> Report:
    curve = load_kernel_curve(inputs.path(kernel))
    chosen = parse_variant(variant)
    if corpus is not None:
        rows = [line_cover_stats(inputs.corpus(corpus), load_tokenizer(tokenizer), name=corpus)]
    else:
        hist = None
        if histogram is not None:
            hist = SpanHistogram.model_validate_json(inputs.text(histogram))

        rows = [(agg, hist) for agg in load_aggregates(inputs.path(aggregates))]

    bounds = []
    failures = []
    table = ReportTable(
        title=f"Speedup bound ({variant_label(chosen)}, {curve.model})",
        columns=["corpus", "T", "T_copy", "T_gen", "K", "mean", "bound"],
    )
    for agg, hist in rows:
        try:
            bound = speedup_bound(agg, hist, curve, chosen)
        except CopySpanError as err:
            failures.append(CaseFailure(case_id=agg.name, reason=str(err)))
            continue

        bounds.append(bound)
        table.rows.append(
            [
                agg.name,
                str(agg.total),
                str(agg.copy_tokens),
                str(agg.gen_tokens),
                str(agg.copy_ops),
                _fmt(agg.mean_span, 1),
                _fmt(bound.value, 2),
            ]
        )

    return Report(
        result=dict(model=curve.model, bounds=[b.model_dump() for b in bounds]),
        tables=[table],
        failures=failures,
    )


@_builder("auto-m")
def _auto_m(
    inputs: _Inputs,
    kernel: str = DEFAULT_KERNEL,
    costs: str = DEFAULT_COSTS,
    threshold: float = 1.0,
    safe_threshold: float = 1.5,
    c_ms: Optional[float] = None,
    grid: str = "measured",
) -> Report:
    curve = load_kernel_curve(inputs.path(kernel))
    fixed = load_fixed_costs(inputs.path(costs))
    report = auto_m(
        curve, fixed, threshold=threshold, safe_threshold=safe_threshold, c_ms=c_ms, grid=grid
    )
    table = ReportTable(
        title=f"Auto-m ({curve.model}): strict m*={report.strict_m}, safe m*={report.safe_m}",
        columns=["N", "s(N)", "floor", f"s > {threshold}", f"s > {safe_threshold}"],
        rows=[
            [
                str(c.n),
                _fmt(c.s),
                _fmt(c.floor, 4),
                "yes" if c.s > max(threshold, c.floor) else "",
                "yes" if c.s > max(safe_threshold, c.floor) else "",
            ]
            for c in report.candidates
        ],
    )
    return Report(result=report.model_dump(), tables=[table], text="\n".join(report.notes) or None)


@_builder("perturb")
def _perturb(
    inputs: _Inputs,
    corpus: str = "mini",
    epsilons: Sequence[int] = (0, 1, 2, 3, 5),
    trials: int = 5,
    seed: int = 42,
    mode: str = "clipped",
) -> Report:
    cfg = PerturbConfig(epsilons=list(epsilons), trials=trials, seed=seed, mode=ResolveMode(mode))
    study = perturbation_study(inputs.corpus(corpus), cfg, name=str(corpus))
    return Report(
        result=study.model_dump(),
        tables=[
            ReportTable(
                title=f"Endpoint noise ({study.n} cases, seed {seed})",
                columns=["eps", "runs", "EM (trimmed)", "EM (byte)"],
                rows=[
                    [str(c.epsilon), str(c.runs), f"{c.em:.2%}", f"{c.byte_em:.2%}"]
                    for c in study.cells
                ],
            )
        ],
        failures=[CaseFailure(case_id=c, reason="no oracle") for c in study.excluded],
    )


@_builder("compare-formats")
def _compare_formats(
    inputs: _Inputs, corpus: str = "mini", tokenizer: str = "byte", context: int = 0
) -> Report:
    report = format_head_to_head(inputs.corpus(corpus), load_tokenizer(tokenizer), context=context)
    table = ReportTable(
        title=f"Format head-to-head ({report.n} cases, {report.tokenizer})",
        columns=["format", "mean", "median", "p95", "total", "RT-EM", "failures"],
    )
    failures = [CaseFailure(case_id=c, reason="no oracle") for c in report.excluded]
    for stats in report.formats:
        table.rows.append(
            [
                stats.format.value,
                _fmt(stats.mean_tokens, 1),
                str(stats.median_tokens),
                str(stats.p95_tokens),
                str(stats.total_tokens),
                _fmt(stats.rt_em, 2),
                str(stats.failures),
            ]
        )
        failures.extend(
            CaseFailure(case_id=case.case_id, reason=f"{stats.format.value}: {case.reason.value}")
            for case in stats.cases
            if case.reason is not None
        )

    return Report(result=report.model_dump(), tables=[table], failures=failures)


@_builder("fsm-sim")
def _fsm_sim(
    inputs: _Inputs,
    corpus: str = "mini",
    tokenizer: str = "byte",
    policy: str = "replay",
    seed: int = 0,
    runs: int = 1000,
    bounded_ranges: bool = False,
    max_gen_tokens: Optional[int] = None,
    max_ops: Optional[int] = None,
) -> Report:
    tok = load_tokenizer(tokenizer)
    table = build_literal_table(tok)
    # Replay keeps the library defaults; random decodes get tight ones.
    overrides: dict[str, Any] = dict(bounded_ranges=bounded_ranges)
    if policy == "random":
        overrides.update(max_gen_tokens=RANDOM_GEN_LIMIT, max_ops=RANDOM_OP_LIMIT)
    if max_gen_tokens is not None:
        overrides["max_gen_tokens"] = max_gen_tokens
    if max_ops is not None:
        overrides["max_ops"] = max_ops

    limits = DecodeLimits(**overrides)
    cases = inputs.corpus(corpus)
    if policy == "random" and not cases:
        raise SchemaError(f"Corpus '{corpus}' has no documents to decode.")

    failures = []
    totals = TraceAccounting()
    parsed = reproduced = limited = attempted = 0
    # Replay grows the defaults to fit each oracle unless limits were given.
    fit = policy == "replay" and max_gen_tokens is None and max_ops is None
    jobs = cases if policy == "replay" else [cases[i % len(cases)] for i in range(runs)]
    for index, case in enumerate(jobs):
        doc = LineDoc(raw=case.doc)
        source = None
        case_limits = limits
        try:
            if policy == "replay":
                source = derive_oracle_line(doc, case.gold)
                chooser = OracleReplayPolicy(source, tok, table)
                if fit:
                    case_limits = chooser.fit_limits(limits)
            else:
                chooser = RandomPolicy(seed + index)

            program, trace = run_decode(chooser, doc, tok, table=table, limits=case_limits)
        except CopySpanError as err:
            failures.append(CaseFailure(case_id=case.id, reason=f"{type(err).__name__}: {err}"))
            continue

        attempted += 1
        limited += trace.limit_exceeded
        for field, value in trace_accounting(trace).model_dump().items():
            setattr(totals, field, getattr(totals, field) + value)

        if parse_program(serialize_program(program)) == program:
            parsed += 1
        else:
            failures.append(CaseFailure(case_id=case.id, reason="does not parse"))

        if source is not None:
            if program == source:
                reproduced += 1
            else:
                failures.append(CaseFailure(case_id=case.id, reason="not reproduced"))

    result: dict[str, Any] = dict(
        policy=policy, runs=attempted, parsed=parsed, limit_exceeded=limited
    )
    row = [policy, str(attempted), str(parsed)]
    if policy == "replay":
        result["reproduced"] = reproduced
        row.append(str(reproduced))

    result["accounting"] = dict(totals.model_dump(), free=totals.free, total=totals.total)
    columns = ["policy", "runs", "parsed"] + (["reproduced"] if policy == "replay" else [])
    return Report(
        result=result,
        tables=[
            ReportTable(title=f"FSM simulation ({tok.name})", columns=columns, rows=[row]),
            ReportTable(
                title="Token accounting",
                columns=["decoded", "masked", "free", "forced", "copied", "splices"],
                rows=[
                    [
                        str(totals.decoded),
                        str(totals.masked_steps),
                        str(totals.free),
                        str(totals.forced),
                        str(totals.copied),
                        str(totals.splices),
                    ]
                ],
            ),
        ],
        failures=failures,
    )


@_builder("pointer-compare")
def _pointer_compare(
    inputs: _Inputs, corpus: str = "mini", kernel: str = DEFAULT_KERNEL, tokenizer: str = "byte"
) -> Report:
    curve = load_kernel_curve(inputs.path(kernel))
    comparison = corpus_pointer_compare(inputs.corpus(corpus), curve, load_tokenizer(tokenizer))
    return Report(
        result=comparison.model_dump(),
        tables=[
            ReportTable(
                title=f"Forward passes per case ({curve.model})",
                columns=["cases", "pointer", "edit program", "ratio"],
                rows=[
                    [
                        str(comparison.cases),
                        _fmt(comparison.pointer_mean, 2),
                        _fmt(comparison.cad_mean, 2),
                        _fmt(comparison.ratio),
                    ]
                ],
            )
        ],
    )


@_builder("combined-spec")
def _combined_spec(
    inputs: _Inputs,
    corpus: str = "mini",
    kernel: str = DEFAULT_KERNEL,
    costs: str = DEFAULT_COSTS,
    tokenizer: str = "byte",
    s_spec: Sequence[float] = (1.0, 2.0, 3.0),
) -> Report:
    curve = load_kernel_curve(inputs.path(kernel))
    fixed = load_fixed_costs(inputs.path(costs))
    cases = inputs.corpus(corpus)
    tok = load_tokenizer(tokenizer)
    rows = [corpus_combined_speedup(cases, tok, fixed, curve, s) for s in s_spec]
    return Report(
        result=dict(rows=[r.model_dump() for r in rows]),
        tables=[
            ReportTable(
                title=f"Copy splicing with accelerated gen regions ({curve.model})",
                columns=["s_spec", "splice only", "combined"],
                rows=[[_fmt(r.s_spec, 2), _fmt(r.cad_only, 2), _fmt(r.combined, 2)] for r in rows],
            )
        ],
    )


@_builder("synth")
def _synth(
    inputs: _Inputs,
    output: str,
    preset: str = "default",
    seed: Optional[int] = None,
    cases: Optional[int] = None,
) -> Report:
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if cases is not None:
        overrides["cases"] = cases

    cfg = SynthConfig.preset(preset, **overrides)
    generated = _synth_corpus(cfg)
    path = write_corpus(generated, output)
    counts = {edit_type.value: 0 for edit_type in EditType}
    for case in generated:
        counts[classify_edit(derive_oracle_line(case.doc, case.gold), case.doc).value] += 1

    return Report(
        result=dict(config=cfg.model_dump(), n=len(generated), edit_types=counts),
        tables=[
            ReportTable(
                title=f"Synthesized {len(generated)} cases ({preset}, seed {cfg.seed})",
                columns=["edit type", "cases"],
                rows=[[name, str(count)] for name, count in counts.items() if count],
            )
        ],
        text=str(path),
    )


def adversarial_strings(count: int, seed: int = 0, max_pieces: int = 12) -> list[str]:
    """
    Random concatenations of reserved literals, their fragments, structural
    characters, whitespace and non-ASCII text. None contain an entity codepoint.
    """
    pieces = [
        *(lit.plain for lit in RESERVED_LITERALS),
        "<",
        ">",
        "/",
        "</",
        "/>",
        "<program>",
        'lines="1-3"',
        "<copy ",
        "gen",
        "copy",
        "\n",
        " ",
        "\t",
        "x",
        "é",
        "語",
        "🙂",
        "&lt;",
    ]
    rng = np.random.default_rng(seed)
    return [
        "".join(pieces[i] for i in rng.integers(len(pieces), size=rng.integers(max_pieces + 1)))
        for _ in range(count)
    ]


@_builder("escape-audit")
def _escape_audit(
    inputs: _Inputs, corpus: str = "mini", fuzz: int = 0, seed: int = 0
) -> Report:
    failures = []
    gold_hits = doc_hits = 0
    rows = []
    cases = inputs.corpus(corpus)
    for case in cases:
        in_gold = audit_reserved_literals(case.gold)
        in_doc = audit_reserved_literals(case.doc)
        gold_hits += len(in_gold)
        doc_hits += len(in_doc)
        if in_gold or in_doc:
            rows.append([case.id, str(len(in_doc)), str(len(in_gold))])

        try:
            carried = unescape_gen_body(escape_gen_body(case.gold)) == case.gold
        except EscapeDomainViolation:
            carried = False

        if not carried:
            failures.append(CaseFailure(case_id=case.id, reason="gold not expressible in a gen"))

    survived = 0
    for index, text in enumerate(adversarial_strings(fuzz, seed=seed)):
        program = Program(ops=[Gen(body=text)])
        escaped = escape_gen_body(text)
        if (
            unescape_gen_body(escaped) == text
            and not audit_reserved_literals(escaped)
            and parse_program(serialize_program(program)) == program
        ):
            survived += 1
        else:
            failures.append(CaseFailure(case_id=f"fuzz-{index}", reason="escape round trip"))

    return Report(
        result=dict(
            cases=len(cases),
            doc_literals=doc_hits,
            gold_literals=gold_hits,
            fuzz=fuzz,
            fuzz_round_trips=survived,
        ),
        tables=[
            ReportTable(
                title=f"Reserved literals ({gold_hits} in golds, {doc_hits} in docs)",
                columns=["case", "in doc", "in gold"],
                rows=rows,
            )
        ],
        failures=failures,
    )


@_builder("tokenizer-report")
def _tokenizer_report(
    inputs: _Inputs, tokenizers: Sequence[str] = DEFAULT_TOKENIZERS
) -> Report:
    report = portability_report(load_tokenizer(spec) for spec in tokenizers)
    singles = report.single_piece_counts
    table = ReportTable(title="Pieces per literal", columns=["literal", *report.tokenizers])
    for row in report.rows:
        table.rows.append([repr(row.literal), *(str(row.pieces[n]) for n in report.tokenizers)])

    table.rows.append(["single-piece literals", *(str(singles[n]) for n in report.tokenizers)])
    return Report(result=dict(report.model_dump(), single_piece=singles), tables=[table])


__all__ = [
    "adversarial_strings",
    "CaseFailure",
    "commands",
    "Report",
    "ReportTable",
    "run_report",
]
