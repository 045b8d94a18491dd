from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Sequence
from enum import Enum
from typing import Annotated, Literal, NamedTuple, Optional, Union

import numpy as np
from loguru import logger
from pydantic import Field

from copyspan.base import BaseModel
from copyspan.document import LineDoc
from copyspan.exceptions import LimitExceeded, PolicyViolation, UnreplayableProgram
from copyspan.grammar import CopyLines, CopyTokens, Gen, Program, escape_gen_body, unescape_gen_body
from copyspan.tokenizer import COPY_TAIL, LiteralTable, Tokenizer, build_literal_table

MAX_DIGITS = 7
MAX_INDEX = 10**MAX_DIGITS - 1


class FsmState(str, Enum):
    AWAIT_OP = "await_op"
    AFTER_LT = "after_lt"
    COPY_LINES = "copy_lines"
    GEN_BODY = "gen_body"
    CLOSE = "close"


class FsmCursor(NamedTuple):
    """
    What a policy sees at each step.
    """

    state: FsmState

    op_index: int
    """Index of the op being decided, or ``len(ops)`` when deciding to close."""

    offset: int
    """
    Steps taken so far inside the current op decision, digit field or gen body.
    """

    field: Optional[Literal["start", "end"]] = None
    """The digit field being entered, in ``COPY_LINES`` only."""

    digits: int = 0
    """Digits entered so far in ``field``."""


class MaskedStep(BaseModel):
    kind: Literal["masked"] = "masked"
    state: FsmState
    allowed: int
    """Size of the allowed set the choice was made from."""

    token_id: int


class ForcedPrefill(BaseModel):
    kind: Literal["forced"] = "forced"
    literal: str
    token_ids: list[int]

    @property
    def token_count(self) -> int:
        return len(self.token_ids)


class FreeToken(BaseModel):
    kind: Literal["free"] = "free"
    token_id: int


class CopySplice(BaseModel):
    kind: Literal["splice"] = "splice"
    start: int
    end: int
    token_ids: list[int]

    @property
    def token_count(self) -> int:
        return len(self.token_ids)


TraceEvent = Annotated[
    Union[MaskedStep, ForcedPrefill, FreeToken, CopySplice], Field(discriminator="kind")
]


class DecodeTrace(BaseModel):
    events: list[TraceEvent] = []
    limit_exceeded: bool = False
    """``True`` when the op limit force-closed the program."""

    @property
    def token_ids(self) -> list[int]:
        """
        The full decoded sequence, spliced spans included.
        """
        ids: list[int] = []
        for event in self.events:
            if isinstance(event, (MaskedStep, FreeToken)):
                ids.append(event.token_id)
            else:
                ids.extend(event.token_ids)

        return ids


class TraceAccounting(BaseModel):
    decoded: int = 0
    """Tokens chosen by the policy, masked or free."""

    copied: int = 0
    """Tokens contributed by splices."""

    forced: int = 0
    """Tokens emitted by forced prefills."""

    splices: int = 0
    masked_steps: int = 0

    @property
    def free(self) -> int:
        return self.decoded - self.masked_steps

    @property
    def total(self) -> int:
        return self.decoded + self.copied + self.forced


def trace_accounting(trace: DecodeTrace) -> TraceAccounting:
    """
    Per-class token totals of a decode trace.
    """
    totals = TraceAccounting()
    for event in trace.events:
        if isinstance(event, MaskedStep):
            totals.decoded += 1
            totals.masked_steps += 1
        elif isinstance(event, FreeToken):
            totals.decoded += 1
        elif isinstance(event, ForcedPrefill):
            totals.forced += event.token_count
        else:
            totals.copied += event.token_count
            totals.splices += 1

    return totals


class DecodeLimits(BaseModel):
    max_gen_tokens: int = Field(default=1024, ge=1)
    """Free tokens per gen body before ``</gen>`` is forced."""

    max_ops: int = Field(default=256, ge=1)
    """Ops per program before ``</program>`` is forced."""

    bounded_ranges: bool = False
    """Also keep copy ranges inside the document, not only well-formed."""

    raise_on_limit: bool = False
    """Raise :class:`~copyspan.exceptions.LimitExceeded` when ``max_ops`` is hit."""


def _op_alternatives(
    table: LiteralTable, first_op: bool, allow_copy: bool = True
) -> dict[str, tuple[int, ...]]:
    # Full id sequence of every op opener legal at an op boundary.
    alternatives = {"gen": table.ids("<") + table.ids("gen")}
    if allow_copy:
        alternatives["copy"] = table.ids("<") + table.ids("copy")
    if not first_op:
        alternatives["close"] = table.ids("</")

    return alternatives


def allowed_tokens(state: FsmState, first_op: bool, table: LiteralTable) -> tuple[int, ...]:
    """
    The head of the allowed set in each state. ``AWAIT_OP`` is the first id of
    every legal opener and ``AFTER_LT`` the next id of every opener that starts
    with the ids of ``<``. When ``</`` encodes as ``<`` plus more ids (the byte
    tokenizer), its ``/`` is therefore allowed after ``<``. ``COPY_LINES``
    returns every id the digit fields can use, and the decoder narrows it per
    sub-position. ``CLOSE`` is forced only, so nothing is allowed.
    """
    if state in (FsmState.AWAIT_OP, FsmState.AFTER_LT):
        lt = table.ids("<")
        k = 0 if state is FsmState.AWAIT_OP else len(lt)
        heads = {
            seq[k]
            for seq in _op_alternatives(table, first_op).values()
            if len(seq) > k and (k == 0 or seq[:k] == lt)
        }

    elif state is FsmState.COPY_LINES:
        heads = {*table.digits.values(), table.hyphen, table.quote}

    elif state is FsmState.GEN_BODY:
        return table.vocab

    else:
        return ()

    return tuple(sorted(heads))


class Policy(ABC):
    """
    Picks one token id out of the allowed set at every non-forced step.
    """

    @abstractmethod
    def choose(self, cursor: FsmCursor, allowed: tuple[int, ...], emitted: Sequence[int]) -> int:
        """
        Args:
            cursor (:class:`~copyspan.fsm.FsmCursor`): Where the decoder is.
            allowed (tuple[int, ...]): Ascending allowed ids. Never empty.
            emitted (Sequence[int]): Every id emitted so far, read-only.

        Returns:
            int: A member of ``allowed``.
        """


class RandomPolicy(Policy):
    """
    Uniform choice over the allowed set, seeded.
    """

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def choose(self, cursor: FsmCursor, allowed: tuple[int, ...], emitted: Sequence[int]) -> int:
        return allowed[int(self.rng.integers(len(allowed)))]


def _reachable(prefix: str, lo: int, hi: int) -> bool:
    # Some number of at most MAX_DIGITS digits starting with `prefix` is in [lo, hi].
    value = int(prefix)
    for extra in range(MAX_DIGITS - len(prefix) + 1):
        scale = 10**extra
        if value * scale <= hi and value * scale + scale - 1 >= lo:
            return True

    return False


class _Decoder:
    def __init__(
        self,
        policy: Policy,
        doc: LineDoc,
        tokenizer: Tokenizer,
        table: LiteralTable,
        limits: DecodeLimits,
    ):
        self.policy = policy
        self.doc = doc
        self.tokenizer = tokenizer
        self.table = table
        self.limits = limits
        self.vocab = frozenset(table.vocab)
        self.emitted: list[int] = []
        self.trace = DecodeTrace()
        self.ops: list[Union[CopyLines, Gen]] = []

    def force(self, ids: Sequence[int]):
        if ids:
            self.trace.events.append(
                ForcedPrefill(literal=self.tokenizer.decode(ids), token_ids=list(ids))
            )
            self.emitted.extend(ids)

    def ask(self, cursor: FsmCursor, allowed: tuple[int, ...]) -> int:
        choice = self.policy.choose(cursor, allowed, self.emitted)
        if choice not in allowed:
            raise PolicyViolation(f"Token {choice} is not allowed at {cursor}.")

        self.trace.events.append(
            MaskedStep(state=cursor.state, allowed=len(allowed), token_id=choice)
        )
        self.emitted.append(choice)
        return choice

    def decide_op(self) -> str:
        ids = self.table.ids
        alternatives = _op_alternatives(
            self.table,
            first_op=not self.ops,
            allow_copy=not (self.limits.bounded_ranges and self.doc.n_lines == 0),
        )

        lt_width = len(ids("<"))
        prefix: list[int] = []
        candidates = sorted(alternatives)
        while len(candidates) > 1:
            k = len(prefix)
            allowed = tuple(sorted({alternatives[name][k] for name in candidates}))
            state = FsmState.AWAIT_OP if k < lt_width else FsmState.AFTER_LT
            prefix.append(self.ask(FsmCursor(state, len(self.ops), k), allowed))
            candidates = [name for name in candidates if alternatives[name][k] == prefix[-1]]

        decision = candidates[0]
        tail = {
            "copy": ids(COPY_TAIL),
            "gen": ids(">"),
            "close": ids("program") + ids(">"),
        }[decision]
        self.force(alternatives[decision][len(prefix) :] + tail)
        return decision

    def read_number(self, field: Literal["start", "end"], lo: int, hi: int) -> int:
        terminator = self.table.hyphen if field == "start" else self.table.quote
        entered = ""
        while True:
            allowed = {
                token_id
                for digit, token_id in self.table.digits.items()
                if (entered or digit != "0")
                and len(entered) < MAX_DIGITS
                and _reachable(entered + digit, lo, hi)
            }
            if entered and lo <= int(entered) <= hi:
                allowed.add(terminator)

            cursor = FsmCursor(
                FsmState.COPY_LINES, len(self.ops), len(entered), field, len(entered)
            )
            choice = self.ask(cursor, tuple(sorted(allowed)))
            if choice == terminator:
                return int(entered)

            entered += self.table.digit_of[choice]

    def copy_op(self) -> CopyLines:
        hi = self.doc.n_lines if self.limits.bounded_ranges else MAX_INDEX
        start = self.read_number("start", 1, hi)
        end = self.read_number("end", start, hi)
        self.force(self.table.ids("/>"))
        span = self.tokenizer.encode(self.doc.span(start, end))
        self.trace.events.append(CopySplice(start=start, end=end, token_ids=span))
        self.emitted.extend(span)
        return CopyLines(start=start, end=end)

    def gen_op(self) -> Gen:
        closer = self.table.gen_close
        window: deque[int] = deque(maxlen=len(closer))
        body: list[int] = []
        while True:
            if len(body) >= self.limits.max_gen_tokens:
                logger.warning(f"Gen {len(self.ops)} hit {len(body)} tokens, forcing close.")
                self.force(closer)
                break

            cursor = FsmCursor(FsmState.GEN_BODY, len(self.ops), len(body))
            choice = self.policy.choose(cursor, self.table.vocab, self.emitted)
            if choice not in self.vocab:
                raise PolicyViolation(f"Token {choice} is not in the vocabulary.")

            self.trace.events.append(FreeToken(token_id=choice))
            self.emitted.append(choice)
            body.append(choice)
            window.append(choice)
            if len(window) == len(closer) and tuple(window) == closer:
                logger.debug(f"Gen {len(self.ops)} closed after {len(body)} tokens.")
                # The closer is structure, not body text.
                events = self.trace.events
                for index in range(len(events) - len(closer), len(events)):
                    events[index] = MaskedStep(
                        state=FsmState.GEN_BODY,
                        allowed=len(self.table.vocab),
                        token_id=events[index].token_id,  # type: ignore[union-attr]
                    )

                del body[-len(closer) :]
                break

        return Gen(body=unescape_gen_body(self.tokenizer.decode(body)))

    def run(self) -> Program:
        ids = self.table.ids
        self.force(ids("<") + ids("program") + ids(">"))
        while True:
            if len(self.ops) >= self.limits.max_ops:
                logger.warning(f"Op limit {self.limits.max_ops} reached, forcing close.")
                self.force(ids("</program>"))
                self.trace.limit_exceeded = True
                break

            decision = self.decide_op()
            if decision == "close":
                break

            self.ops.append(self.copy_op() if decision == "copy" else self.gen_op())

        return Program(ops=self.ops)


def run_decode(
    policy: Policy,
    doc: Union[LineDoc, str],
    tokenizer: Tokenizer,
    table: Optional[LiteralTable] = None,
    limits: Optional[DecodeLimits] = None,
) -> tuple[Program, DecodeTrace]:
    """
    Decode one program under the grammar FSM. Op-type choices and copy indices
    are masked steps, tag remainders are forced prefills, gen bodies are free
    until the ``</gen>`` id sequence appears, and every committed copy range
    splices the tokens of its lines.

    Args:
        policy (:class:`~copyspan.fsm.Policy`): Makes every non-forced choice.
        doc (Union[:class:`~copyspan.document.LineDoc`, str]): The input document.
        tokenizer (:class:`~copyspan.tokenizer.Tokenizer`): The active tokenizer.
        table (Optional[:class:`~copyspan.tokenizer.LiteralTable`]): Built from
          ``tokenizer`` when omitted.
        limits (Optional[:class:`~copyspan.fsm.DecodeLimits`]): Defaults apply
          when omitted.

    Raises:
        :class:`~copyspan.exceptions.PolicyViolation`: The policy chose outside
          the allowed set.
        :class:`~copyspan.exceptions.LimitExceeded`: Only with
          ``limits.raise_on_limit``. The program and trace ride on the exception.

    Returns:
        tuple[:class:`~copyspan.grammar.Program`, :class:`~copyspan.fsm.DecodeTrace`]
    """
    limits = limits or DecodeLimits()
    decoder = _Decoder(
        policy,
        LineDoc.model_validate(doc),
        tokenizer,
        table or build_literal_table(tokenizer),
        limits,
    )
    program = decoder.run()
    if decoder.trace.limit_exceeded and limits.raise_on_limit:
        raise LimitExceeded(
            f"Program hit the {limits.max_ops}-op limit.", program=program, trace=decoder.trace
        )

    return program, decoder.trace


class OracleReplayPolicy(Policy):
    """
    Drives :func:`~copyspan.fsm.run_decode` to reproduce ``program`` exactly.

    Raises:
        :class:`~copyspan.exceptions.UnreplayableProgram`: For token copies, or a
          gen body whose encoding contains the ``</gen>`` id sequence before its end.
    """

    def __init__(
        self, program: Program, tokenizer: Tokenizer, table: Optional[LiteralTable] = None
    ):
        table = table or build_literal_table(tokenizer)
        self.program = program
        self.table = table
        ids = table.ids
        self.decisions: list[tuple[int, ...]] = []
        self.fields: list[dict[str, str]] = []
        self.bodies: list[list[int]] = []
        for index, op in enumerate(program.ops):
            if isinstance(op, CopyTokens):
                raise UnreplayableProgram(f"Op {index}: token copies cannot be decoded.")

            elif isinstance(op, CopyLines):
                self.decisions.append(ids("<") + ids("copy"))
                self.fields.append(dict(start=f"{op.start}-", end=f'{op.end}"'))
                self.bodies.append([])

            else:
                body = tokenizer.encode(escape_gen_body(op.body)) + list(table.gen_close)
                self._check_detector(index, body)
                self.decisions.append(ids("<") + ids("gen"))
                self.fields.append({})
                self.bodies.append(body)

        self.decisions.append(ids("</"))

    def fit_limits(self, limits: DecodeLimits) -> DecodeLimits:
        """
        ``limits`` raised just enough that replaying the program never hits them.
        """
        longest = max((len(body) for body in self.bodies), default=0)
        return limits.model_copy(
            update=dict(
                max_gen_tokens=max(limits.max_gen_tokens, longest),
                max_ops=max(limits.max_ops, len(self.program.ops) + 1),
            )
        )

    def _check_detector(self, index: int, body: list[int]):
        closer = list(self.table.gen_close)
        for end in range(len(closer), len(body)):
            if body[end - len(closer) : end] == closer:
                raise UnreplayableProgram(
                    f"Op {index}: gen body encodes the closer at token {end - len(closer)}."
                )

    def choose(self, cursor: FsmCursor, allowed: tuple[int, ...], emitted: Sequence[int]) -> int:
        if cursor.state in (FsmState.AWAIT_OP, FsmState.AFTER_LT):
            return self.decisions[cursor.op_index][cursor.offset]

        elif cursor.state is FsmState.COPY_LINES:
            char = self.fields[cursor.op_index][cursor.field or "start"][cursor.digits]
            if char == "-":
                return self.table.hyphen
            elif char == '"':
                return self.table.quote

            return self.table.digits[char]

        return self.bodies[cursor.op_index][cursor.offset]


__all__ = [
    "allowed_tokens",
    "CopySplice",
    "DecodeLimits",
    "DecodeTrace",
    "ForcedPrefill",
    "FreeToken",
    "FsmCursor",
    "FsmState",
    "MaskedStep",
    "OracleReplayPolicy",
    "Policy",
    "RandomPolicy",
    "run_decode",
    "trace_accounting",
    "TraceAccounting",
]
