import pytest
from pydantic import ValidationError

from copyspan.exceptions import EscapeDomainViolation, MalformedProgram
from copyspan.grammar import (
    RESERVED_LITERALS,
    CopyLines,
    CopyTokens,
    Gen,
    Program,
    audit_reserved_literals,
    escape_gen_body,
    parse_program,
    serialize_program,
    unescape_gen_body,
)


@pytest.fixture
def program():
    return Program(
        ops=[CopyLines(start=1, end=3), Gen(body="\nx = 2\n"), CopyLines(start=5, end=9)]
    )


def test_serialize(program):
    expected = '<program><copy lines="1-3"/><gen>\nx = 2\n</gen><copy lines="5-9"/></program>'
    assert serialize_program(program) == expected
    assert str(program) == expected


def test_parse(program):
    assert parse_program(serialize_program(program)) == program


def test_parse_surrounding_whitespace(program):
    assert parse_program(f"\n  {serialize_program(program)}\n") == program


def test_parse_token_copies():
    parsed = parse_program('<program><copy tokens="0-4"/><gen>x</gen></program>')
    assert parsed.ops == [CopyTokens(start=0, end=4), Gen(body="x")]
    assert parsed.copy_ops == [CopyTokens(start=0, end=4)]
    assert parsed.gen_ops == [Gen(body="x")]


@pytest.mark.parametrize(
    "index,expected",
    (("+2-3", (2, 3)), ("002-03", (2, 3)), ("2.0-3.00", (2, 3)), ("+1-+1", (1, 1))),
)
def test_parse_normalizes_indices(index, expected):
    parsed = parse_program(f'<program><copy lines="{index}"/></program>')
    assert parsed.ops == [CopyLines(start=expected[0], end=expected[1])]
    assert serialize_program(parsed) == (
        f'<program><copy lines="{expected[0]}-{expected[1]}"/></program>'
    )


def test_reserved_literals():
    plains = [lit.plain for lit in RESERVED_LITERALS]
    assert sorted(plains) == sorted(["<copy", "</copy>", "<gen>", "</gen>", "</program>"])
    # Longest first.
    assert plains.index("</copy>") < plains.index("<copy")
    for lit in RESERVED_LITERALS:
        assert "<" not in lit.entity
        assert ">" not in lit.entity
        assert "/" not in lit.entity


@pytest.mark.parametrize(
    "text",
    (
        "plain text",
        "if a </gen> b:",
        '<copy lines="1-2"/>',
        "</program></copy><gen>",
        "<</gen>>",
        "",
        "é語🙂 <copy",
    ),
)
def test_escape_round_trip(text):
    escaped = escape_gen_body(text)
    assert not audit_reserved_literals(escaped)
    assert unescape_gen_body(escaped) == text


def test_gen_body_with_reserved_literals_parses():
    body = "a = '</gen>'\nb = '<copy'\n"
    program = Program(ops=[Gen(body=body)])
    text = serialize_program(program)
    assert "</gen>'" not in text
    assert parse_program(text).ops[0].body == body


def test_escape_domain_violation():
    entity = escape_gen_body("</gen>")
    with pytest.raises(EscapeDomainViolation):
        escape_gen_body(f"x {entity}")


def test_audit_reserved_literals():
    hits = audit_reserved_literals("ab</copy>é<copy")
    # Byte offsets: the accented character is two bytes.
    assert hits == [("</copy>", 2), ("<copy", 11)]
    assert audit_reserved_literals("nothing here") == []


@pytest.mark.parametrize("start,end", ((0, 1), (3, 2), (-1, 4)))
def test_invalid_line_range(start, end):
    with pytest.raises(ValidationError):
        CopyLines(start=start, end=end)


def test_invalid_token_range():
    with pytest.raises(ValidationError):
        CopyTokens(start=4, end=3)

    assert CopyTokens(start=0, end=0).start == 0


def test_empty_program():
    with pytest.raises(ValidationError):
        Program(ops=[])


@pytest.mark.parametrize(
    "text,offset",
    (
        ("", 0),
        ("<program></program>", 9),
        ('<program><copy lines="0-2"/></program>', 9),
        ('<program><copy lines="3-2"/></program>', 9),
        ('<program><copy lines="1-2"></program>', 9),
        ("<program><gen>x</program>", 9),
        ('<program><copy lines="1-2"/>', 28),
        ('<program><copy lines="1-2"/>junk</program>', 28),
        ('<program><copy lines="1-2"/></program>x', 38),
        ('<program><gen>é</gen>?</program>', 22),
        ('<program><copy lines="1.5-2"/></program>', 9),
        ('<program><copy lines="-1-2"/></program>', 9),
        ('<program><copy lines="1--2"/></program>', 9),
        ('<program><copy tokens="-1-2"/></program>', 9),
    ),
)
def test_malformed(text, offset):
    with pytest.raises(MalformedProgram) as err:
        parse_program(text)

    assert err.value.offset == offset


def test_equality_is_structural(program):
    clone = Program.model_validate(program.model_dump())
    assert clone == program
    assert clone != Program(ops=[CopyLines(start=1, end=3)])
