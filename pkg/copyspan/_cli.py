import sys
from typing import Any, Optional

import click
from loguru import logger
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from copyspan.align import DEFAULT_MIN_SPANS
from copyspan.exceptions import CopySpanError
from copyspan.perturb import DEFAULT_EPSILONS
from copyspan.report import DEFAULT_COSTS, DEFAULT_KERNEL, DEFAULT_TOKENIZERS, Report, run_report

HARNESS_ERROR = 2

console = Console()
err_console = Console(stderr=True)


def _render(report: Report):
    for spec in report.tables:
        table = Table(title=spec.title, show_header=True, header_style="bold cyan")
        for index, column in enumerate(spec.columns):
            table.add_column(column, justify="left" if index == 0 else "right")

        for row in spec.rows:
            table.add_row(*row)

        console.print(table)

    if report.text is not None:
        click.echo(report.text)

    if report.failures:
        err_console.print(f"[red]{len(report.failures)} case failure(s)[/red]")
        for failure in report.failures[:20]:
            err_console.print(f"  {escape(failure.case_id)}: {escape(failure.reason)}")


def _run(command: str, out: Optional[str], **inputs: Any):
    try:
        report = run_report(command, inputs, out=out)
    except (CopySpanError, OSError, ValueError) as err:
        err_console.print(f"[red]{type(err).__name__}:[/red] {escape(str(err))}")
        sys.exit(HARNESS_ERROR)

    _render(report)
    sys.exit(report.exit_code)


def tokenizer_option(fn):
    return click.option(
        "--tokenizer",
        default="byte",
        show_default=True,
        help="'byte' or 'vocab:<file or bundled name>'.",
    )(fn)


def kernel_option(fn):
    return click.option(
        "--kernel",
        default=DEFAULT_KERNEL,
        show_default=True,
        help="Kernel curve JSON (path or bundled fixture).",
    )(fn)


def costs_option(fn):
    return click.option(
        "--costs",
        default=DEFAULT_COSTS,
        show_default=True,
        help="Fixed-cost JSON (path or bundled fixture).",
    )(fn)


def corpus_option(fn):
    return click.option(
        "--corpus",
        default="mini",
        show_default=True,
        help="JSONL corpus, or 'mini' for the bundled regression corpus.",
    )(fn)


def out_option(fn):
    return click.option(
        "--out", type=click.Path(dir_okay=False), help="Write the JSON report here."
    )(fn)


_existing = click.Path(exists=True, dir_okay=False)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-op detail to stderr.")
def cli(verbose: bool):
    """
    Edit programs that copy line ranges from a document and generate the rest.
    """
    logger.remove()
    logger.enable("copyspan")
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")


@cli.command()
@click.argument("program", type=_existing)
@out_option
def parse(program, out):
    """Parse a program and print its canonical form."""
    _run("parse", out, program=program)


@cli.command("resolve")
@click.argument("program", type=_existing)
@click.argument("doc", type=_existing)
@click.option(
    "--mode", type=click.Choice(["strict", "clipped"]), default="strict", show_default=True
)
@tokenizer_option
@out_option
def resolve_cmd(program, doc, mode, tokenizer, out):
    """Expand PROGRAM against DOC and print the output."""
    _run("resolve", out, program=program, doc=doc, mode=mode, tokenizer=tokenizer)


@cli.command()
@click.argument("doc", type=_existing)
@click.argument("gold", type=_existing)
@click.option(
    "--granularity", type=click.Choice(["line", "token"]), default="line", show_default=True
)
@tokenizer_option
@out_option
def oracle(doc, gold, granularity, tokenizer, out):
    """Derive the oracle program that turns DOC into GOLD."""
    _run("oracle", out, doc=doc, gold=gold, granularity=granularity, tokenizer=tokenizer)


@cli.command()
@corpus_option
@click.option(
    "--granularity", type=click.Choice(["line", "token"]), default="line", show_default=True
)
@tokenizer_option
@out_option
def roundtrip(corpus, granularity, tokenizer, out):
    """Oracle, serialize, parse, resolve and compare every case."""
    _run("roundtrip", out, corpus=corpus, granularity=granularity, tokenizer=tokenizer)


@cli.command()
@corpus_option
@tokenizer_option
@click.option("--level", type=click.Choice(["line", "token"]), default="line", show_default=True)
@click.option(
    "--min-span", "min_spans", type=int, multiple=True, help="Minimum span m. Repeatable."
)
@out_option
def ceiling(corpus, tokenizer, level, min_spans, out):
    """Copy ceiling of a corpus at line or token level."""
    _run(
        "ceiling",
        out,
        corpus=corpus,
        tokenizer=tokenizer,
        level=level,
        min_spans=list(min_spans or ((8,) if level == "line" else DEFAULT_MIN_SPANS)),
    )


@cli.command()
@kernel_option
@click.option("--aggregates", default="aggregates.json", show_default=True)
@click.option("--variant", default="m8", show_default=True, help="m<k>, nbar or exact.")
@click.option("--histogram", type=_existing, help="Span histogram JSON for the exact variant.")
@click.option("--corpus", help="Compute aggregates and histogram from this corpus instead.")
@tokenizer_option
@out_option
def bounds(kernel, aggregates, variant, histogram, corpus, tokenizer, out):
    """Closed-form speedup bound per corpus."""
    _run(
        "bounds",
        out,
        kernel=kernel,
        aggregates=aggregates,
        variant=variant,
        histogram=histogram,
        corpus=corpus,
        tokenizer=tokenizer,
    )


@cli.command("auto-m")
@kernel_option
@costs_option
@click.option("--threshold", type=float, default=1.0, show_default=True)
@click.option("--safe-threshold", type=float, default=1.5, show_default=True)
@click.option("--c-ms", type=float, help="Per-op overhead. Defaults to mask + sync cost.")
@click.option(
    "--grid", type=click.Choice(["measured", "integer"]), default="measured", show_default=True
)
@out_option
def auto_m_cmd(kernel, costs, threshold, safe_threshold, c_ms, grid, out):
    """Smallest span length worth splicing."""
    _run(
        "auto-m",
        out,
        kernel=kernel,
        costs=costs,
        threshold=threshold,
        safe_threshold=safe_threshold,
        c_ms=c_ms,
        grid=grid,
    )


@cli.command()
@corpus_option
@click.option("--eps", "epsilons", type=int, multiple=True, help="Noise magnitude. Repeatable.")
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option(
    "--mode", type=click.Choice(["strict", "clipped"]), default="clipped", show_default=True
)
@out_option
def perturb(corpus, epsilons, trials, seed, mode, out):
    """Exact match under copy-endpoint noise."""
    _run(
        "perturb",
        out,
        corpus=corpus,
        epsilons=list(epsilons or DEFAULT_EPSILONS),
        trials=trials,
        seed=seed,
        mode=mode,
    )


@cli.command("compare-formats")
@corpus_option
@tokenizer_option
@click.option("--context", type=int, default=0, show_default=True, help="Unified-diff context.")
@out_option
def compare_formats(corpus, tokenizer, context, out):
    """Program vs search/replace vs unified diff vs full regeneration."""
    _run("compare-formats", out, corpus=corpus, tokenizer=tokenizer, context=context)


@cli.command("fsm-sim")
@corpus_option
@tokenizer_option
@click.option(
    "--policy", type=click.Choice(["replay", "random"]), default="replay", show_default=True
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--runs", type=int, default=1000, show_default=True, help="Random decodes.")
@click.option("--bounded-ranges", is_flag=True, help="Keep copy ranges inside the document.")
@click.option(
    "--max-gen-tokens", type=int, help="Gen body limit. Defaults to 64 for random, 1024 for replay."
)
@click.option("--max-ops", type=int, help="Op limit. Defaults to 32 for random, 256 for replay.")
@out_option
def fsm_sim(corpus, tokenizer, policy, seed, runs, bounded_ranges, max_gen_tokens, max_ops, out):
    """Decode programs under the grammar FSM."""
    _run(
        "fsm-sim",
        out,
        corpus=corpus,
        tokenizer=tokenizer,
        policy=policy,
        seed=seed,
        runs=runs,
        bounded_ranges=bounded_ranges,
        max_gen_tokens=max_gen_tokens,
        max_ops=max_ops,
    )


@cli.command("pointer-compare")
@corpus_option
@kernel_option
@tokenizer_option
@out_option
def pointer_compare(corpus, kernel, tokenizer, out):
    """Forward passes against a span-level pointer decoder."""
    _run("pointer-compare", out, corpus=corpus, kernel=kernel, tokenizer=tokenizer)


@cli.command("combined-spec")
@corpus_option
@kernel_option
@costs_option
@tokenizer_option
@click.option(
    "--s-spec", "s_spec", type=float, multiple=True, help="Gen-region speedup. Repeatable."
)
@out_option
def combined_spec(corpus, kernel, costs, tokenizer, s_spec, out):
    """Copy splicing combined with accelerated gen regions."""
    _run(
        "combined-spec",
        out,
        corpus=corpus,
        kernel=kernel,
        costs=costs,
        tokenizer=tokenizer,
        s_spec=list(s_spec or (1.0, 2.0, 3.0)),
    )


@cli.command()
@click.argument("output", type=click.Path(dir_okay=False))
@click.option(
    "--preset",
    type=click.Choice(["default", "perturbation", "boilerplate", "copy-heavy"]),
    default="default",
    show_default=True,
)
@click.option("--seed", type=int)
@click.option("--cases", type=int)
@out_option
def synth(output, preset, seed, cases, out):
    """Write a synthetic corpus to OUTPUT."""
    _run("synth", out, output=output, preset=preset, seed=seed, cases=cases)


@cli.command("escape-audit")
@corpus_option
@click.option("--fuzz", type=int, default=0, show_default=True, help="Adversarial strings.")
@click.option("--seed", type=int, default=0, show_default=True)
@out_option
def escape_audit(corpus, fuzz, seed, out):
    """Reserved literals in a corpus, plus an optional escape-codec fuzz."""
    _run("escape-audit", out, corpus=corpus, fuzz=fuzz, seed=seed)


@cli.command("tokenizer-report")
@click.option(
    "--tokenizer", "tokenizers", multiple=True, help="Tokenizer spec. Repeatable."
)
@out_option
def tokenizer_report(tokenizers, out):
    """Piece counts of the structural literals per tokenizer."""
    _run("tokenizer-report", out, tokenizers=list(tokenizers or DEFAULT_TOKENIZERS))
