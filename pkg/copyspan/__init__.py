from loguru import logger

from copyspan.align import derive_oracle_line, derive_oracle_token, line_cover_stats
from copyspan.base import BaseModel
from copyspan.corpus import CorpusCase, SynthConfig, load_corpus, synth_corpus
from copyspan.costmodel import FixedCosts, KernelCurve, speedup_bound
from copyspan.document import LineDoc
from copyspan.exceptions import CopySpanError
from copyspan.formats import format_head_to_head
from copyspan.fsm import DecodeLimits, OracleReplayPolicy, RandomPolicy, run_decode
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program, parse_program, serialize_program
from copyspan.perturb import PerturbConfig, perturbation_study
from copyspan.resolver import ResolveMode, compare_em, resolve
from copyspan.tokenizer import ByteTokenizer, VocabTokenizer, load_tokenizer

# Library use is silent; the CLI turns logging on.
logger.disable("copyspan")

__all__ = [
    "BaseModel",
    "ByteTokenizer",
    "compare_em",
    "CopyLines",
    "CopySpanError",
    "CopyTokens",
    "CorpusCase",
    "DecodeLimits",
    "derive_oracle_line",
    "derive_oracle_token",
    "FixedCosts",
    "format_head_to_head",
    "Gen",
    "KernelCurve",
    "line_cover_stats",
    "LineDoc",
    "load_corpus",
    "load_tokenizer",
    "OracleReplayPolicy",
    "parse_program",
    "perturbation_study",
    "PerturbConfig",
    "Program",
    "RandomPolicy",
    "resolve",
    "ResolveMode",
    "run_decode",
    "serialize_program",
    "speedup_bound",
    "synth_corpus",
    "SynthConfig",
    "VocabTokenizer",
]
