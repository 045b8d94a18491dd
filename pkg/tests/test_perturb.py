import numpy as np
import pytest
from pydantic import ValidationError

from copyspan.corpus import CorpusCase
from copyspan.grammar import CopyLines, Gen, Program
from copyspan.perturb import (
    DEFAULT_EPSILONS,
    PerturbConfig,
    perturb_endpoints,
    perturbation_study,
    trial_rng,
)
from copyspan.resolver import ResolveMode


@pytest.fixture
def program():
    return Program(ops=[CopyLines(start=1, end=2), Gen(body="\nX\n"), CopyLines(start=4, end=6)])


def test_config_defaults():
    cfg = PerturbConfig()
    assert cfg.epsilons == list(DEFAULT_EPSILONS)
    assert cfg.trials == 5
    assert cfg.mode is ResolveMode.CLIPPED
    assert PerturbConfig(epsilons=[3, 0, 3, 1]).epsilons == [0, 1, 3]


@pytest.mark.parametrize(
    "overrides",
    (dict(epsilons=[]), dict(epsilons=[-1, 2]), dict(trials=0)),
)
def test_config_validation(overrides):
    with pytest.raises(ValidationError):
        PerturbConfig(**overrides)


def test_zero_noise_is_identity(program):
    assert perturb_endpoints(program, 0, 6, trial_rng(0, "x", 0)) is program


def test_negative_noise(program):
    with pytest.raises(ValueError):
        perturb_endpoints(program, -1, 6, trial_rng(0, "x", 0))


@pytest.mark.parametrize("epsilon", (1, 2, 5, 50))
def test_endpoints_stay_in_document(program, epsilon):
    for trial in range(30):
        noisy = perturb_endpoints(program, epsilon, 6, trial_rng(1, "x", trial))
        assert noisy.ops[1] == program.ops[1]
        for before, after in zip(program.copy_ops, noisy.copy_ops):
            assert 1 <= after.start <= 6
            assert 1 <= after.end <= 6
            assert abs(after.start - before.start) <= epsilon
            assert abs(after.end - before.end) <= epsilon


def test_offsets_cover_the_range(program):
    seen = set()
    for trial in range(200):
        noisy = perturb_endpoints(program, 1, 6, trial_rng(2, "x", trial))
        seen.add(noisy.copy_ops[1].start - 4)

    assert seen == {-1, 0, 1}


def test_trial_rng():
    first = trial_rng(42, "case-a", 0).random(4)
    assert np.array_equal(first, trial_rng(42, "case-a", 0).random(4))
    assert not np.array_equal(first, trial_rng(42, "case-a", 1).random(4))
    assert not np.array_equal(first, trial_rng(42, "case-b", 0).random(4))
    assert not np.array_equal(first, trial_rng(7, "case-a", 0).random(4))


def test_larger_noise_moves_at_least_as_far(program):
    # One shared stream per trial: a zero offset at a larger magnitude is also
    # a zero offset at every smaller one.
    for trial in range(50):
        exact = [
            perturb_endpoints(program, eps, 6, trial_rng(3, "x", trial)) == program
            for eps in (1, 2, 3, 5)
        ]
        assert exact == sorted(exact, reverse=True)


def test_study_on_synthetic_corpus(synth_perturbation):
    report = perturbation_study(synth_perturbation, name="synth")
    assert report.corpus == "synth"
    assert report.n == len(synth_perturbation)
    assert not report.excluded
    assert report.em(0) == 1.0
    assert report.em(1) < 0.6

    ems = [cell.em for cell in report.cells]
    assert ems == sorted(ems, reverse=True)

    runs = {cell.epsilon: cell.runs for cell in report.cells}
    assert runs[0] == report.n
    assert runs[5] == report.n * report.config.trials


def test_study_is_deterministic(mini_corpus):
    cfg = PerturbConfig(epsilons=[0, 2], trials=3, seed=11)
    first = perturbation_study(mini_corpus, cfg, name="mini")
    second = perturbation_study(mini_corpus, cfg, name="mini")
    assert first.model_dump_json() == second.model_dump_json()


def test_strict_mode_counts_overflow_as_a_miss():
    doc = "".join(f"{i}\n" for i in range(1, 4))
    case = CorpusCase(id="tiny", doc=doc, gold="1\nX\n3\n")
    strict = perturbation_study([case], PerturbConfig(epsilons=[3], mode="strict"))
    clipped = perturbation_study([case], PerturbConfig(epsilons=[3]))
    assert strict.em(3) <= clipped.em(3)
    assert all(t.clipped == 0 for t in strict.trials)


def test_oracle_copies_survive_zero_noise(mini_corpus):
    report = perturbation_study(mini_corpus, PerturbConfig(epsilons=[0]))
    assert report.em(0) == 1.0
    assert report.cells[0].byte_em == 1.0
    assert len(report.trials) == len(mini_corpus)
