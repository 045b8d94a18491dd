from pathlib import Path

import numpy as np
import pytest

from copyspan.align import line_cover_stats
from copyspan.corpus import SynthConfig, load_corpus, synth_corpus
from copyspan.costmodel import load_fixed_costs, load_kernel_curve
from copyspan.data import fixture_path
from copyspan.tokenizer import load_tokenizer

MINI_SIZE = 40
FUZZ_LINES = ("", "a", "b", "c", "x = 1", "    return x", "é", "</gen>")


@pytest.fixture(scope="session")
def mini_corpus():
    return load_corpus("mini")


@pytest.fixture(scope="session")
def mini_case(mini_corpus):
    def fn(case_id: str):
        return next(case for case in mini_corpus if case.id == case_id)

    return fn


@pytest.fixture(scope="session")
def byte_tokenizer():
    return load_tokenizer("byte")


@pytest.fixture(scope="session")
def single_piece_tokenizer():
    return load_tokenizer("vocab:single_piece")


@pytest.fixture(scope="session")
def fragmenting_tokenizer():
    return load_tokenizer("vocab:fragmenting")


@pytest.fixture(scope="session", params=("byte", "vocab:single_piece", "vocab:fragmenting"))
def tokenizer(request):
    return load_tokenizer(request.param)


@pytest.fixture(scope="session")
def kernel_7b():
    return load_kernel_curve(fixture_path("kernel_7b.json"))


@pytest.fixture(scope="session")
def kernel_1_5b():
    return load_kernel_curve(fixture_path("kernel_1_5b.json"))


@pytest.fixture(scope="session")
def costs_7b():
    return load_fixed_costs(fixture_path("costs_7b.json"))


@pytest.fixture(scope="session")
def costs_1_5b():
    return load_fixed_costs(fixture_path("costs_1_5b.json"))


@pytest.fixture(scope="session")
def synth_default():
    return synth_corpus(SynthConfig.preset("default"))


@pytest.fixture(scope="session")
def synth_perturbation():
    return synth_corpus(SynthConfig.preset("perturbation"))


@pytest.fixture(scope="session")
def synth_boilerplate():
    return synth_corpus(SynthConfig.preset("boilerplate"))


@pytest.fixture(scope="session")
def mini_stats(mini_corpus, byte_tokenizer):
    return line_cover_stats(mini_corpus, byte_tokenizer, name="mini")


@pytest.fixture
def write_text(tmp_path):
    def fn(name: str, content: str) -> Path:
        path = tmp_path / name
        path.write_text(content, encoding="utf8")
        return path

    return fn


@pytest.fixture(scope="session")
def fuzz_pairs():
    """
    1,000 seeded (doc, gold) pairs over a small line alphabet, so that most
    golds share lines with their document.
    """
    rng = np.random.default_rng(1234)
    pairs = []
    for _ in range(1000):
        doc = [FUZZ_LINES[i] for i in rng.integers(len(FUZZ_LINES), size=rng.integers(9))]
        gold = [FUZZ_LINES[i] for i in rng.integers(len(FUZZ_LINES), size=rng.integers(9))]
        trailing = ("", "\n", "\n\n")[rng.integers(3)]
        pairs.append(
            ("\n".join(doc) + "\n" if doc else "", "\n".join(gold) + trailing if gold else "")
        )

    return pairs
