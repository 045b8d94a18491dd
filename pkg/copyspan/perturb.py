import math
from collections.abc import Iterable
from typing import Optional

import numpy as np
from loguru import logger
from pydantic import Field, field_validator

from copyspan.align import derive_oracle_line
from copyspan.base import BaseModel
from copyspan.corpus import CorpusCase
from copyspan.document import LineDoc
from copyspan.exceptions import CopySpanError, OutOfRange
from copyspan.grammar import CopyLines, Program
from copyspan.resolver import ResolveMode, compare_em, resolve
from copyspan.utils import stable_hash

DEFAULT_EPSILONS = (0, 1, 2, 3, 5)


class PerturbConfig(BaseModel):
    epsilons: list[int] = Field(default=list(DEFAULT_EPSILONS), min_length=1)
    """Noise magnitudes. Each endpoint moves by a uniform integer in ``[-eps, +eps]``."""

    trials: int = Field(default=5, ge=1)
    seed: int = 42

    mode: ResolveMode = ResolveMode.CLIPPED
    """How perturbed programs are resolved. Strict turns every overflow into a miss."""

    @field_validator("epsilons")
    @classmethod
    def validate_epsilons(cls, value):
        if any(eps < 0 for eps in value):
            raise ValueError("Noise magnitudes must be non-negative.")

        return sorted(set(value))


def trial_rng(seed: int, case_id: str, trial: int) -> np.random.Generator:
    """
    The random stream of one trial of one case. The stream does not depend on
    the noise magnitude: every magnitude of a trial sees the same draws.
    """
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(stable_hash(case_id), trial))
    )


def _offset(u: float, epsilon: int) -> int:
    return min(math.floor(u * (2 * epsilon + 1)), 2 * epsilon) - epsilon


def perturb_endpoints(
    program: Program, epsilon: int, n_lines: int, rng: np.random.Generator
) -> Program:
    """
    Move each line-copy endpoint by an independent uniform integer offset in
    ``[-epsilon, +epsilon]``, then clamp it into ``1..n_lines``. Gen ops are
    untouched. A clamped range may end up inverted. The result is built without
    validation so that such ranges survive for clipped resolution.

    Args:
        program (:class:`~copyspan.grammar.Program`): Usually a line oracle.
        epsilon (int): Noise magnitude. ``0`` returns ``program`` itself.
        n_lines (int): Line count of the document.
        rng (``numpy.random.Generator``): One uniform draw per endpoint, start
          first.

    Returns:
        :class:`~copyspan.grammar.Program`
    """
    if epsilon < 0:
        raise ValueError(f"Noise magnitude must be non-negative, got '{epsilon}'.")
    elif epsilon == 0:
        return program

    def clamp(value: int) -> int:
        return max(1, min(value, n_lines))

    ops = []
    for op in program.ops:
        if isinstance(op, CopyLines):
            start = clamp(op.start + _offset(rng.random(), epsilon))
            end = clamp(op.end + _offset(rng.random(), epsilon))
            op = CopyLines.model_construct(start=start, end=end)

        ops.append(op)

    return Program.model_construct(ops=ops)


class PerturbTrial(BaseModel):
    case_id: str
    epsilon: int
    trial: int
    exact: bool
    """Trimmed exact match."""

    byte_exact: bool
    clipped: int = 0
    """Copy ops whose range had to be clipped."""


class PerturbCell(BaseModel):
    epsilon: int
    runs: int
    em: float
    """Trimmed exact-match rate over every case and trial."""

    byte_em: float


class PerturbReport(BaseModel):
    corpus: str
    config: PerturbConfig
    n: int
    excluded: list[str] = []
    cells: list[PerturbCell]
    trials: list[PerturbTrial]

    def em(self, epsilon: int) -> float:
        return next(cell.em for cell in self.cells if cell.epsilon == epsilon)


def _run(
    case: CorpusCase, oracle: Program, doc: LineDoc, epsilon: int, trial: int, cfg: PerturbConfig
) -> PerturbTrial:
    rng = trial_rng(cfg.seed, case.id, trial)
    program = perturb_endpoints(oracle, epsilon, doc.n_lines, rng)
    try:
        outcome = resolve(program, doc, mode=cfg.mode)
    except OutOfRange:
        return PerturbTrial(
            case_id=case.id, epsilon=epsilon, trial=trial, exact=False, byte_exact=False
        )

    em = compare_em(outcome.text, case.gold)
    return PerturbTrial(
        case_id=case.id,
        epsilon=epsilon,
        trial=trial,
        exact=em.trimmed,
        byte_exact=em.byte_exact,
        clipped=len(outcome.warnings),
    )


def perturbation_study(
    corpus: Iterable[CorpusCase], cfg: Optional[PerturbConfig] = None, name: str = "corpus"
) -> PerturbReport:
    """
    Resolve noisy copies of each case's line oracle and measure how exact match
    decays with the noise magnitude. A noise magnitude of zero runs one trial
    per case, since it is the identity.

    Cases without an oracle are excluded and listed. The report is a function
    of the corpus and ``cfg`` alone.

    Returns:
        :class:`~copyspan.perturb.PerturbReport`
    """
    cfg = cfg or PerturbConfig()
    trials: list[PerturbTrial] = []
    excluded = []
    n = 0
    for case in corpus:
        doc = LineDoc(raw=case.doc)
        try:
            oracle = derive_oracle_line(doc, case.gold)
        except CopySpanError as err:
            logger.warning(f"Excluding case '{case.id}': {err}")
            excluded.append(case.id)
            continue

        n += 1
        for epsilon in cfg.epsilons:
            for trial in range(1 if epsilon == 0 else cfg.trials):
                trials.append(_run(case, oracle, doc, epsilon, trial, cfg))

    trials.sort(key=lambda t: (t.case_id, t.epsilon, t.trial))
    cells = []
    for epsilon in cfg.epsilons:
        runs = [t for t in trials if t.epsilon == epsilon]
        count = len(runs) or 1
        cells.append(
            PerturbCell(
                epsilon=epsilon,
                runs=len(runs),
                em=sum(t.exact for t in runs) / count,
                byte_em=sum(t.byte_exact for t in runs) / count,
            )
        )
        logger.info(f"eps={epsilon}: EM {cells[-1].em:.2%} over {len(runs)} runs.")

    return PerturbReport(
        corpus=name, config=cfg, n=n, excluded=excluded, cells=cells, trials=trials
    )


__all__ = [
    "DEFAULT_EPSILONS",
    "perturb_endpoints",
    "perturbation_study",
    "PerturbCell",
    "PerturbConfig",
    "PerturbReport",
    "PerturbTrial",
    "trial_rng",
]
