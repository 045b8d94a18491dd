import pytest

from copyspan.align import derive_oracle_line
from copyspan.exceptions import LimitExceeded, PolicyViolation, UnreplayableProgram
from copyspan.fsm import (
    CopySplice,
    DecodeLimits,
    ForcedPrefill,
    FsmState,
    MaskedStep,
    OracleReplayPolicy,
    Policy,
    RandomPolicy,
    allowed_tokens,
    run_decode,
    trace_accounting,
)
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program, parse_program, serialize_program
from copyspan.tokenizer import build_literal_table

DOC = "a\nb\nc\n"
RANDOM_RUNS = 10_000


@pytest.fixture
def program():
    return Program(ops=[CopyLines(start=1, end=2), Gen(body="\nX\n")])


def test_allowed_tokens(single_piece_tokenizer):
    table = build_literal_table(single_piece_tokenizer)
    lt, close = table.ids("<")[0], table.ids("</")[0]
    assert allowed_tokens(FsmState.AWAIT_OP, True, table) == (lt,)
    assert allowed_tokens(FsmState.AWAIT_OP, False, table) == tuple(sorted((lt, close)))
    after_lt = allowed_tokens(FsmState.AFTER_LT, False, table)
    assert set(after_lt) == {table.ids("copy")[0], table.ids("gen")[0]}
    assert len(allowed_tokens(FsmState.COPY_LINES, False, table)) == 12
    assert allowed_tokens(FsmState.GEN_BODY, False, table) == table.vocab
    assert allowed_tokens(FsmState.CLOSE, False, table) == ()


def test_allowed_tokens_shared_lt_prefix(program, byte_tokenizer):
    # "</" is "<" plus one id here, so "/" is decided right after "<".
    table = build_literal_table(byte_tokenizer)
    lt, slash = table.ids("</")
    copy, gen = table.ids("copy")[0], table.ids("gen")[0]
    assert table.ids("<") == (lt,)
    assert allowed_tokens(FsmState.AWAIT_OP, False, table) == (lt,)
    assert set(allowed_tokens(FsmState.AFTER_LT, True, table)) == {copy, gen}
    assert set(allowed_tokens(FsmState.AFTER_LT, False, table)) == {copy, gen, slash}

    _, trace = run_decode(OracleReplayPolicy(program, byte_tokenizer), DOC, byte_tokenizer)
    after_lt = [
        e.allowed
        for e in trace.events
        if isinstance(e, MaskedStep) and e.state is FsmState.AFTER_LT
    ]
    assert after_lt == [
        len(allowed_tokens(FsmState.AFTER_LT, True, table)),
        len(allowed_tokens(FsmState.AFTER_LT, False, table)),
        len(allowed_tokens(FsmState.AFTER_LT, False, table)),
    ]



def test_replay_trace(program, byte_tokenizer):
    policy = OracleReplayPolicy(program, byte_tokenizer)
    decoded, trace = run_decode(policy, DOC, byte_tokenizer)
    assert decoded == program
    assert byte_tokenizer.decode(trace.token_ids) == (
        '<program><copy lines="1-2"/>a\nb<gen>\nX\n</gen></program>'
    )

    totals = trace_accounting(trace)
    assert totals.masked_steps == 16
    assert totals.free == 3
    assert totals.decoded == 19
    assert totals.forced == 33
    assert totals.copied == 3
    assert totals.splices == 1
    assert totals.total == 55

    splice = next(e for e in trace.events if isinstance(e, CopySplice))
    assert (splice.start, splice.end) == (1, 2)
    assert isinstance(trace.events[0], ForcedPrefill)
    assert trace.events[0].literal == "<program>"


def test_replay_reproduces_oracles(mini_corpus, tokenizer):
    table = build_literal_table(tokenizer)
    for case in mini_corpus:
        oracle = derive_oracle_line(case.doc, case.gold)
        policy = OracleReplayPolicy(oracle, tokenizer, table)
        decoded, trace = run_decode(policy, case.doc, tokenizer, table=table)
        assert decoded == oracle, case.id
        assert not trace.limit_exceeded


def test_replay_escapes_reserved_literals(byte_tokenizer):
    program = Program(ops=[Gen(body="x = '</gen>' + '<copy'")])
    decoded, _ = run_decode(OracleReplayPolicy(program, byte_tokenizer), DOC, byte_tokenizer)
    assert decoded == program


def test_replay_rejects_token_copies(byte_tokenizer):
    with pytest.raises(UnreplayableProgram):
        OracleReplayPolicy(Program(ops=[CopyTokens(start=0, end=2)]), byte_tokenizer)


def test_random_decodes_always_parse(mini_corpus, byte_tokenizer):
    table = build_literal_table(byte_tokenizer)
    limits = DecodeLimits(max_gen_tokens=8, max_ops=8)
    for seed in range(RANDOM_RUNS):
        doc = mini_corpus[seed % len(mini_corpus)].doc
        program, trace = run_decode(RandomPolicy(seed), doc, byte_tokenizer, table, limits)
        assert parse_program(serialize_program(program)) == program
        assert len(program.ops) <= limits.max_ops


@pytest.mark.parametrize("seed", range(20))
def test_random_decodes_other_tokenizers(seed, single_piece_tokenizer, fragmenting_tokenizer):
    for tokenizer in (single_piece_tokenizer, fragmenting_tokenizer):
        limits = DecodeLimits(max_gen_tokens=16, max_ops=6)
        program, _ = run_decode(RandomPolicy(seed), DOC, tokenizer, limits=limits)
        assert parse_program(serialize_program(program)) == program


def test_random_decode_is_deterministic(byte_tokenizer):
    limits = DecodeLimits(max_gen_tokens=8, max_ops=8)
    first = run_decode(RandomPolicy(7), DOC, byte_tokenizer, limits=limits)
    second = run_decode(RandomPolicy(7), DOC, byte_tokenizer, limits=limits)
    assert first == second


def test_bounded_ranges(byte_tokenizer):
    limits = DecodeLimits(max_gen_tokens=4, max_ops=8, bounded_ranges=True)
    for seed in range(200):
        program, _ = run_decode(RandomPolicy(seed), DOC, byte_tokenizer, limits=limits)
        assert all(op.end <= 3 for op in program.copy_ops)


def test_bounded_ranges_empty_document(byte_tokenizer):
    limits = DecodeLimits(max_gen_tokens=4, max_ops=4, bounded_ranges=True)
    for seed in range(50):
        program, _ = run_decode(RandomPolicy(seed), "", byte_tokenizer, limits=limits)
        assert not program.copy_ops


def test_gen_limit_forces_close(byte_tokenizer):
    limits = DecodeLimits(max_gen_tokens=5, max_ops=3)
    for seed in range(50):
        program, _ = run_decode(RandomPolicy(seed), DOC, byte_tokenizer, limits=limits)
        for op in program.gen_ops:
            assert len(byte_tokenizer.encode(op.body)) <= 5


def test_op_limit(byte_tokenizer):
    limits = DecodeLimits(max_gen_tokens=4, max_ops=1)
    program, trace = run_decode(RandomPolicy(3), DOC, byte_tokenizer, limits=limits)
    assert len(program.ops) == 1
    assert trace.limit_exceeded
    assert trace.events[-1].literal == "</program>"

    with pytest.raises(LimitExceeded) as err:
        run_decode(
            RandomPolicy(3),
            DOC,
            byte_tokenizer,
            limits=limits.model_copy(update=dict(raise_on_limit=True)),
        )

    assert err.value.program == program
    assert err.value.trace.limit_exceeded


def test_policy_violation(byte_tokenizer):
    class Rogue(Policy):
        def choose(self, cursor, allowed, emitted):
            return -1

    with pytest.raises(PolicyViolation):
        run_decode(Rogue(), DOC, byte_tokenizer)


def test_copy_digits_are_masked(program, byte_tokenizer):
    _, trace = run_decode(OracleReplayPolicy(program, byte_tokenizer), DOC, byte_tokenizer)
    digit_steps = [
        e for e in trace.events if isinstance(e, MaskedStep) and e.state is FsmState.COPY_LINES
    ]
    # "1", "-", "2", '"'
    assert len(digit_steps) == 4
    # No leading zero, no terminator before a digit.
    assert digit_steps[0].allowed == 9


def test_replay_fuzz_pairs(fuzz_pairs, byte_tokenizer):
    table = build_literal_table(byte_tokenizer)
    for doc, gold in fuzz_pairs:
        oracle = derive_oracle_line(doc, gold)
        policy = OracleReplayPolicy(oracle, byte_tokenizer, table)
        decoded, trace = run_decode(policy, doc, byte_tokenizer, table=table)
        assert decoded == oracle, (doc, gold)
        assert not trace.limit_exceeded


def test_fit_limits_for_long_bodies(byte_tokenizer):
    program = Program(ops=[CopyLines(start=1, end=1), Gen(body="\n" + "x" * 1500 + "\n")])
    policy = OracleReplayPolicy(program, byte_tokenizer)
    limits = policy.fit_limits(DecodeLimits())
    assert limits.max_gen_tokens > 1500
    assert limits.max_ops == DecodeLimits().max_ops

    decoded, trace = run_decode(policy, DOC, byte_tokenizer, limits=limits)
    assert decoded == program
    assert not trace.limit_exceeded

    # The library default force-closes the body.
    truncated, _ = run_decode(OracleReplayPolicy(program, byte_tokenizer), DOC, byte_tokenizer)
    assert truncated != program
