import pytest

from copyspan.exceptions import SchemaError, UnencodableLiteral
from copyspan.tokenizer import (
    STRUCTURAL_LITERALS,
    ByteTokenizer,
    VocabTokenizer,
    build_literal_table,
    load_tokenizer,
    portability_report,
)

COPY_OP = '<copy lines="1-3"/>'
GEN_OP = "<gen>content</gen>"


@pytest.mark.parametrize(
    "spec,copy_op,gen_close,gen_op",
    (
        ("byte", 19, 6, 18),
        ("vocab:single_piece", 8, 3, 7),
        ("vocab:fragmenting", 10, 4, 8),
    ),
)
def test_piece_counts(spec, copy_op, gen_close, gen_op):
    tokenizer = load_tokenizer(spec)
    assert tokenizer.count(COPY_OP) == copy_op
    assert tokenizer.count("</gen>") == gen_close
    assert tokenizer.count(GEN_OP) == gen_op


@pytest.mark.parametrize(
    "text", ("", "plain", "é語🙂", "\r\n\t", "a\udcff b", "</gen>" * 3, "\x00")
)
def test_lossless(tokenizer, text):
    assert tokenizer.is_lossless(text)


def test_byte_tokenizer():
    tokenizer = ByteTokenizer()
    assert tokenizer.name == "byte"
    assert tokenizer.encode("é") == [0xC3, 0xA9]
    assert tokenizer.vocab_ids == tuple(range(256))
    assert tokenizer.count("") == 0


def test_vocab_longest_match(single_piece_tokenizer):
    ids = single_piece_tokenizer.encode("</gen>")
    assert [single_piece_tokenizer.decode([i]) for i in ids] == ["</", "gen", ">"]
    assert all(i >= 256 for i in ids)


def test_vocab_byte_fallback(single_piece_tokenizer):
    assert single_piece_tokenizer.encode("zz") == [ord("z"), ord("z")]


def test_vocab_file_with_explicit_ids(tmp_path):
    path = tmp_path / "small.vocab"
    path.write_text("ab\t300\n\nabc\ncd\t256\n", encoding="utf8")
    tokenizer = VocabTokenizer.from_file(path)
    assert tokenizer.name == "vocab:small"
    assert tokenizer.encode("abcd") == [257, ord("d")]
    assert tokenizer.encode("abd") == [300, ord("d")]
    assert tokenizer.encode("cd") == [256]
    assert 300 in tokenizer.vocab_ids


@pytest.mark.parametrize(
    "content,line",
    (
        ("ab\t12\n", 1),
        ("ab\tx\n", 1),
        ("ab\nab\n", 2),
        ("ab\t300\ncd\t300\n", 2),
    ),
)
def test_vocab_file_errors(tmp_path, content, line):
    path = tmp_path / "bad.vocab"
    path.write_text(content, encoding="utf8")
    with pytest.raises(SchemaError) as err:
        VocabTokenizer.from_file(path)

    assert err.value.line == line


def test_vocab_constructor_errors():
    with pytest.raises(SchemaError):
        VocabTokenizer({"": 300})

    with pytest.raises(SchemaError):
        VocabTokenizer({"a": 65})


def test_load_tokenizer(tmp_path):
    assert load_tokenizer("vocab:single_piece.vocab").name == "vocab:single_piece"
    path = tmp_path / "mine.vocab"
    path.write_text("xyz\n", encoding="utf8")
    assert load_tokenizer(f"vocab:{path}").name == "vocab:mine"
    tokenizer = ByteTokenizer()
    assert load_tokenizer(tokenizer) is tokenizer


@pytest.mark.parametrize("spec", ("bpe", "vocab:", "sentencepiece:x"))
def test_load_tokenizer_unknown(spec):
    with pytest.raises(SchemaError):
        load_tokenizer(spec)


def test_literal_table(fragmenting_tokenizer):
    table = build_literal_table(fragmenting_tokenizer)
    assert table.tokenizer == "vocab:fragmenting"
    assert table.pieces("</gen>") == 4
    assert table.gen_close == tuple(fragmenting_tokenizer.encode("</gen>"))
    assert sorted(table.digits) == list("0123456789")
    assert table.digit_of[table.digits["7"]] == "7"
    assert table.vocab == fragmenting_tokenizer.vocab_ids


def test_literal_table_single_pieces():
    tokenizer = VocabTokenizer({"-": 300, '"': 301})
    table = build_literal_table(tokenizer)
    assert table.hyphen == 300
    assert table.quote == 301

    class Doubling(ByteTokenizer):
        def encode(self, text):
            return [b for b in super().encode(text) for _ in range(2 if text.isdigit() else 1)]

    with pytest.raises(UnencodableLiteral):
        build_literal_table(Doubling())


def test_portability_report(byte_tokenizer, single_piece_tokenizer, fragmenting_tokenizer):
    report = portability_report([byte_tokenizer, single_piece_tokenizer, fragmenting_tokenizer])
    assert report.tokenizers == ["byte", "vocab:single_piece", "vocab:fragmenting"]
    assert len(report.rows) == len(STRUCTURAL_LITERALS) + 2
    assert report.single_piece_counts == {
        "byte": 3,
        "vocab:single_piece": 11,
        "vocab:fragmenting": 7,
    }
    copy_row = next(row for row in report.rows if row.literal == COPY_OP)
    assert copy_row.pieces == {"byte": 19, "vocab:single_piece": 8, "vocab:fragmenting": 10}
