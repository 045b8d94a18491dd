import pytest

from copyspan.document import LineDoc, split_lines


@pytest.mark.parametrize(
    "raw,lines",
    (
        ("", []),
        ("a", ["a"]),
        ("a\n", ["a"]),
        ("a\nb", ["a", "b"]),
        ("a\n\n", ["a", ""]),
        ("\n", [""]),
        ("a\r\nb\r\n", ["a\r", "b\r"]),
    ),
)
def test_split_lines(raw, lines):
    assert split_lines(raw) == lines
    assert LineDoc(raw=raw).lines == tuple(lines)


def test_validate_from_str_and_path(tmp_path):
    path = tmp_path / "doc.py"
    path.write_text("x = 1\ny = 2\n", encoding="utf8")
    from_path = LineDoc.from_file(path)
    from_str = LineDoc.model_validate("x = 1\ny = 2\n")
    assert from_path == from_str
    assert from_str.raw == "x = 1\ny = 2\n"
    assert from_str.n_lines == len(from_str) == 2


def test_lines_are_recomputed():
    doc = LineDoc(raw="a\nb\n", lines=("stale",))
    assert doc.lines == ("a", "b")


def test_span():
    doc = LineDoc(raw="one\ntwo\nthree\n")
    assert doc.span(1, 2) == "one\ntwo"
    assert doc.span(3, 3) == "three"
    assert doc.span(2, 9) == "two\nthree"
    assert doc.span(3, 2) == ""
    assert doc.text == "one\ntwo\nthree"


def test_getitem():
    doc = LineDoc(raw="one\ntwo\nthree")
    assert doc[1] == "one"
    assert doc[3] == "three"
    assert doc[2:4] == ["two", "three"]
    assert doc[:2] == ["one"]
    assert list(doc) == ["one", "two", "three"]
    with pytest.raises(IndexError):
        doc[0]

    with pytest.raises(IndexError):
        doc[4]


def test_repr():
    assert repr(LineDoc(raw="a\nb\n")) == "<LineDoc lines=2>"
