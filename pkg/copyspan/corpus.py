from collections.abc import Iterable
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from loguru import logger
from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_core import PydanticCustomError

from copyspan.base import BaseModel
from copyspan.exceptions import SchemaError

MINI_CORPUS = "mini_corpus.jsonl"


class EditType(str, Enum):
    """
    Edit taxonomy used to label cases and to steer synthetic corpora.
    """

    REPLACE = "replace"
    INSERT = "insert"
    DELETE = "delete"
    COMPOUND = "compound"
    """Two or more disjoint edit regions."""

    IDENTITY = "identity"
    """No edit at all. Never synthesized, only reported."""


class CorpusCase(BaseModel):
    """
    One (document, gold) pair.
    """

    id: str
    doc: str
    gold: str

    instruction: Optional[str] = None
    """Carried through to reports for context. Never interpreted."""


def load_corpus(path: Union[Path, str]) -> list[CorpusCase]:
    """
    Load a JSONL corpus, one case per line. Blank lines are skipped.

    Args:
        path (Union[Path, str]): The corpus file, or ``mini`` for the bundled
          regression corpus.

    Raises:
        :class:`~copyspan.exceptions.SchemaError`: With the offending line number,
          for invalid JSON, a missing field or a duplicate id.

    Returns:
        list[:class:`~copyspan.corpus.CorpusCase`]
    """
    if str(path) == "mini":
        from copyspan.data import fixture_path

        path = fixture_path(MINI_CORPUS)

    cases = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf8").split("\n"), start=1):
        if not line.strip():
            continue

        try:
            case = CorpusCase.model_validate_json(line)
        except ValidationError as err:
            raise SchemaError(str(err), line=lineno) from err

        if case.id in seen:
            raise SchemaError(f"Duplicate case id '{case.id}'.", line=lineno)

        seen.add(case.id)
        cases.append(case)

    logger.info(f"Loaded {len(cases)} cases from '{path}'.")
    return cases


def write_corpus(cases: Iterable[CorpusCase], path: Union[Path, str]) -> Path:
    """
    Write ``cases`` as JSONL with canonical (sorted-key, minified) lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{case.model_dump_json()}\n" for case in cases), encoding="utf8")
    return path


class SynthConfig(BaseModel):
    """
    Knobs for :func:`~copyspan.corpus.synth_corpus`. Ranges are inclusive.
    """

    seed: int = 0
    n_cases: int = Field(default=40, alias="cases", ge=1)
    doc_lines: tuple[int, int] = (12, 40)
    """Line count range of each generated document."""

    edits: tuple[int, int] = (2, 4)
    """Region count range of a compound case."""

    edit_span: tuple[int, int] = (1, 3)
    """Line count range of a single edit."""

    edit_mix: dict[EditType, float] = {
        EditType.REPLACE: 1.0,
        EditType.INSERT: 1.0,
        EditType.DELETE: 1.0,
        EditType.COMPOUND: 1.0,
    }
    """Relative weight of each edit type."""

    boilerplate_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    """Chance that a document line is drawn from a small pool of repeated lines."""

    @field_validator("doc_lines", "edits", "edit_span")
    @classmethod
    def validate_range(cls, value, info):
        lo, hi = value
        if lo < 1 or lo > hi:
            raise PydanticCustomError(
                f"{SynthConfig.__name__}Error",
                "Range {field} must satisfy 1 <= lo <= hi, got {lo}-{hi}.",
                dict(field=info.field_name, lo=lo, hi=hi),
            )

        return value

    @field_validator("edit_mix")
    @classmethod
    def validate_edit_mix(cls, value):
        if EditType.IDENTITY in value:
            raise PydanticCustomError(
                f"{SynthConfig.__name__}Error", "Identity is not a synthesizable edit.", {}
            )
        elif any(weight < 0 for weight in value.values()) or sum(value.values()) <= 0:
            raise PydanticCustomError(
                f"{SynthConfig.__name__}Error",
                "Edit weights must be non-negative with a positive total.",
                {},
            )

        return value

    @model_validator(mode="after")
    def validate_doc_size(self):
        # First and last lines are never edited.
        if self.doc_lines[0] < 3:
            raise PydanticCustomError(
                f"{SynthConfig.__name__}Error", "Documents need at least 3 lines.", {}
            )

        return self

    @classmethod
    def preset(cls, name: str, **overrides) -> "SynthConfig":
        """
        Named configurations used by the test-suite and the ``synth`` command:

        * ``default``: a balanced mix over medium documents.
        * ``perturbation``: 60 cases of 24-40 unique lines, every oracle has at
          least three ops.
        * ``boilerplate``: most lines come from the repeated pool, so
          search/replace anchors are frequently ambiguous.
        * ``copy-heavy``: long documents with small, sparse edits.
        """
        presets: dict[str, dict] = {
            "default": {},
            "perturbation": dict(
                cases=60,
                doc_lines=(24, 40),
                edit_mix={EditType.REPLACE: 1, EditType.INSERT: 1, EditType.COMPOUND: 1},
            ),
            "boilerplate": dict(boilerplate_prob=0.8),
            "copy-heavy": dict(
                doc_lines=(40, 80),
                edit_span=(1, 2),
                edit_mix={EditType.REPLACE: 2, EditType.INSERT: 1},
            ),
        }
        if name not in presets:
            raise SchemaError(f"Unknown preset '{name}'. Expected one of {sorted(presets)}.")

        return cls.model_validate({**presets[name], **overrides})


_NAMES = ("alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta")
_CALLS = ("load", "merge", "scale", "clip", "emit", "shift", "fold")
_INDENTS = ("", "    ", "        ")
_BOILERPLATE = ("    return None", "    pass", "}", "# ----", "        break")


class _LineFactory:
    def __init__(self, rng: np.random.Generator, case_index: int):
        self.rng = rng
        self.case_index = case_index
        self.counter = 0

    def unique(self, marker: str = "") -> str:
        self.counter += 1
        indent = _INDENTS[self.rng.integers(len(_INDENTS))]
        name = _NAMES[self.rng.integers(len(_NAMES))]
        call = _CALLS[self.rng.integers(len(_CALLS))]
        return f"{indent}{name}{marker}_{self.case_index}_{self.counter} = {call}({self.counter})"

    def doc_line(self, boilerplate_prob: float) -> str:
        if boilerplate_prob and self.rng.random() < boilerplate_prob:
            return _BOILERPLATE[self.rng.integers(len(_BOILERPLATE))]

        return self.unique()


def _draw(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def _apply_edits(
    lines: list[str],
    kinds: list[EditType],
    cfg: SynthConfig,
    rng: np.random.Generator,
    factory: _LineFactory,
) -> list[str]:
    # Candidate positions are two apart and never the first or last line, so
    # every edit keeps an untouched line on each side.
    candidates = np.arange(1, len(lines) - 1, 2)
    count = min(len(kinds), len(candidates))
    positions = sorted(int(p) for p in rng.choice(candidates, size=count, replace=False))
    gold = list(lines)
    limits = [*positions[1:], len(lines) - 1]
    for pos, limit, kind in reversed(list(zip(positions, limits, kinds))):
        span = max(1, min(_draw(rng, cfg.edit_span), limit - pos - 1))
        if kind is EditType.INSERT:
            gold[pos:pos] = [factory.unique("_new") for _ in range(span)]
        elif kind is EditType.DELETE:
            del gold[pos : pos + span]
        else:
            gold[pos : pos + span] = [factory.unique("_new") for _ in range(span)]

    return gold


def synth_corpus(cfg: Optional[SynthConfig] = None) -> list[CorpusCase]:
    """
    Generate a deterministic corpus. Every gold is its document with known line
    edits applied, so a line-level oracle always exists.

    Args:
        cfg (Optional[:class:`~copyspan.corpus.SynthConfig`]): Defaults to
          ``SynthConfig()``.

    Returns:
        list[:class:`~copyspan.corpus.CorpusCase`]
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    types = sorted(cfg.edit_mix, key=lambda kind: kind.value)
    weights = np.array([cfg.edit_mix[kind] for kind in types], dtype=float)
    weights /= weights.sum()
    simple = [EditType.REPLACE, EditType.INSERT, EditType.DELETE]

    cases = []
    for index in range(cfg.n_cases):
        factory = _LineFactory(rng, index)
        lines = [factory.doc_line(cfg.boilerplate_prob) for _ in range(_draw(rng, cfg.doc_lines))]
        edit_type = types[int(rng.choice(len(types), p=weights))]
        if edit_type is EditType.COMPOUND:
            kinds = [simple[int(rng.integers(3))] for _ in range(max(2, _draw(rng, cfg.edits)))]
        else:
            kinds = [edit_type]

        gold = _apply_edits(lines, kinds, cfg, rng, factory)
        cases.append(
            CorpusCase(
                id=f"synth-{cfg.seed}-{index:04d}",
                doc="\n".join(lines) + "\n",
                gold="\n".join(gold) + "\n",
                instruction=f"{edit_type.value} edit",
            )
        )

    logger.info(f"Synthesized {len(cases)} cases (seed={cfg.seed}).")
    return cases


__all__ = [
    "CorpusCase",
    "EditType",
    "load_corpus",
    "synth_corpus",
    "SynthConfig",
    "write_corpus",
]
