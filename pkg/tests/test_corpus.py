import json

import pytest
from pydantic import ValidationError

from copyspan.align import classify_edit, derive_oracle_line
from copyspan.corpus import (
    CorpusCase,
    EditType,
    SynthConfig,
    load_corpus,
    synth_corpus,
    write_corpus,
)
from copyspan.exceptions import SchemaError


def test_load_mini(mini_corpus):
    assert len(mini_corpus) == 40
    assert len({case.id for case in mini_corpus}) == 40
    assert all(case.instruction for case in mini_corpus)


def test_write_and_load(tmp_path):
    cases = [
        CorpusCase(id="b", doc="x\n", gold="y\n"),
        CorpusCase(id="a", doc="é\n", gold="", instruction="delete everything"),
    ]
    path = write_corpus(cases, tmp_path / "nested" / "corpus.jsonl")
    rows = path.read_text(encoding="utf8").splitlines()
    assert json.loads(rows[0]) == {"doc": "x\n", "gold": "y\n", "id": "b"}
    assert rows[1] == '{"doc":"é\\n","gold":"","id":"a","instruction":"delete everything"}'
    assert load_corpus(path) == cases


def test_blank_lines_are_skipped(write_text):
    path = write_text("corpus.jsonl", '\n{"id": "a", "doc": "", "gold": ""}\n\n')
    assert [case.id for case in load_corpus(path)] == ["a"]


@pytest.mark.parametrize(
    "content,line",
    (
        ('{"id": "a", "doc": "", "gold": ""}\nnot json\n', 2),
        ('{"id": "a", "doc": ""}\n', 1),
        ('{"id": "a", "doc": "", "gold": ""}\n\n{"id": "a", "doc": "", "gold": ""}\n', 3),
    ),
)
def test_load_errors(write_text, content, line):
    with pytest.raises(SchemaError) as err:
        load_corpus(write_text("bad.jsonl", content))

    assert err.value.line == line


def test_synth_is_deterministic():
    cfg = SynthConfig(seed=3, cases=5)
    assert synth_corpus(cfg) == synth_corpus(cfg)
    assert synth_corpus(cfg) != synth_corpus(SynthConfig(seed=4, cases=5))


def test_synth_cases(synth_default):
    assert len(synth_default) == 40
    assert synth_default[0].id == "synth-0-0000"
    for case in synth_default:
        assert case.doc.endswith("\n")
        assert case.gold.endswith("\n")
        assert case.doc != case.gold
        assert 12 <= case.doc.count("\n") <= 40


def test_synth_edit_types(synth_default):
    for case in synth_default:
        oracle = derive_oracle_line(case.doc, case.gold)
        kind = classify_edit(oracle, case.doc)
        assert case.instruction == f"{kind.value} edit", case.id


def test_perturbation_preset(synth_perturbation):
    assert len(synth_perturbation) == 60
    for case in synth_perturbation:
        assert len(derive_oracle_line(case.doc, case.gold).ops) >= 3
        assert not case.instruction.startswith("delete")


def test_boilerplate_preset(synth_boilerplate):
    lines = [line for case in synth_boilerplate for line in case.doc.splitlines()]
    assert lines.count("    pass") > len(synth_boilerplate)


def test_preset_overrides():
    cfg = SynthConfig.preset("copy-heavy", seed=9)
    assert cfg.seed == 9
    assert cfg.doc_lines == (40, 80)
    assert SynthConfig.preset("default") == SynthConfig()

    with pytest.raises(SchemaError):
        SynthConfig.preset("huge")


@pytest.mark.parametrize(
    "overrides",
    (
        dict(doc_lines=(5, 4)),
        dict(edit_span=(0, 2)),
        dict(doc_lines=(2, 10)),
        dict(edit_mix={EditType.IDENTITY: 1.0}),
        dict(edit_mix={EditType.REPLACE: -1.0, EditType.INSERT: 2.0}),
        dict(edit_mix={EditType.REPLACE: 0.0}),
        dict(cases=0),
        dict(boilerplate_prob=1.5),
    ),
)
def test_synth_config_validation(overrides):
    with pytest.raises(ValidationError):
        SynthConfig(**overrides)


def test_single_type_mix():
    cases = synth_corpus(SynthConfig(cases=10, edit_mix={EditType.DELETE: 1.0}))
    assert all(case.instruction == "delete edit" for case in cases)
    assert all(case.gold.count("\n") < case.doc.count("\n") for case in cases)
