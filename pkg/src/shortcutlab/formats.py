"""Token alphabet and token-level format recognizers.

Every structured-output format is a small hand-written DFA over token
*classes* (think/answer/box delimiters, filler, digit).  Trailing ``Eos`` is
stripped before a sequence is fed to a recognizer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class Tok(enum.IntEnum):
    THINK_OPEN = 0
    THINK_CLOSE = 1
    ANSWER_OPEN = 2
    ANSWER_CLOSE = 3
    BOX_OPEN = 4
    BOX_CLOSE = 5
    FILLER = 6
    D0 = 7
    D1 = 8
    D2 = 9
    D3 = 10
    D4 = 11
    D5 = 12
    D6 = 13
    D7 = 14
    D8 = 15
    D9 = 16
    EOS = 17


VOCAB_SIZE = len(Tok)
EOS = int(Tok.EOS)
DIGITS = tuple(range(int(Tok.D0), int(Tok.D9) + 1))
STRUCTURAL = frozenset(range(int(Tok.THINK_OPEN), int(Tok.BOX_CLOSE) + 1))

_NAMES = {
    Tok.THINK_OPEN: "<think>",
    Tok.THINK_CLOSE: "</think>",
    Tok.ANSWER_OPEN: "<answer>",
    Tok.ANSWER_CLOSE: "</answer>",
    Tok.BOX_OPEN: "\\boxed{",
    Tok.BOX_CLOSE: "}",
    Tok.FILLER: "_",
    Tok.EOS: "<eos>",
}
for _d in range(10):
    _NAMES[Tok(int(Tok.D0) + _d)] = str(_d)
_BY_NAME = {name: int(tok) for tok, name in _NAMES.items()}


def digit(value: int) -> int:
    if not 0 <= value <= 9:
        raise ValueError(f"digit value out of range: {value}")
    return int(Tok.D0) + value


def is_digit(token: int) -> bool:
    return int(Tok.D0) <= token <= int(Tok.D9)


def render(seq: Iterable[int]) -> str:
    return " ".join(_NAMES[Tok(t)] for t in seq)


def parse(text: str) -> tuple[int, ...]:
    """Parse the whitespace-separated notation produced by :func:`render`.

    Runs of digits may be written together (``"12"`` is two digit tokens).
    """
    out: list[int] = []
    for word in text.split():
        if word in _BY_NAME:
            out.append(_BY_NAME[word])
        elif word.isdigit():
            out.extend(digit(int(c)) for c in word)
        else:
            raise ValueError(f"unknown token {word!r}")
    return tuple(out)


def check_sequence(seq: Sequence[int], max_len: int | None = None) -> None:
    """Raise ``ValueError`` unless ``seq`` is a well-formed token sequence."""
    for i, t in enumerate(seq):
        if not 0 <= t < VOCAB_SIZE:
            raise ValueError(f"token id {t} at position {i} outside the vocabulary")
        if t == EOS and i != len(seq) - 1:
            raise ValueError(f"Eos at position {i} is not final")
    if max_len is not None and len(seq) > max_len:
        raise ValueError(f"sequence length {len(seq)} exceeds max_len {max_len}")


def strip_eos(seq: Sequence[int]) -> Sequence[int]:
    if len(seq) and seq[-1] == EOS:
        return seq[:-1]
    return seq


class FormatId(str, enum.Enum):
    STRICT = "Strict"
    COMPOSITE = "Composite"
    F1_NESTED = "F1Nested"
    F2_NESTED = "F2Nested"
    F3_NESTED = "F3Nested"
    F1_EXCL = "F1Excl"
    F2_EXCL = "F2Excl"
    F3_EXCL = "F3Excl"


NESTED = (FormatId.F1_NESTED, FormatId.F2_NESTED, FormatId.F3_NESTED)
EXCLUSIVE = (FormatId.F1_EXCL, FormatId.F2_EXCL, FormatId.F3_EXCL)


# --- DFAs -------------------------------------------------------------------

# Token classes used to write transitions compactly.  "X" is any
# non-structural token (filler or digit).
_CLASSES: dict[str, tuple[int, ...]] = {
    "Ti": (int(Tok.THINK_OPEN),),
    "Tc": (int(Tok.THINK_CLOSE),),
    "Ao": (int(Tok.ANSWER_OPEN),),
    "Ac": (int(Tok.ANSWER_CLOSE),),
    "Bo": (int(Tok.BOX_OPEN),),
    "Bc": (int(Tok.BOX_CLOSE),),
    "F": (int(Tok.FILLER),),
    "D": DIGITS,
    "X": (int(Tok.FILLER),) + DIGITS,
    "*": tuple(range(VOCAB_SIZE - 1)),
}


@dataclass(frozen=True)
class Dfa:
    """Deterministic automaton over the 17 non-Eos tokens.

    State 0 is the start state and state ``dead`` absorbs everything.
    """

    table: np.ndarray  # (n_states, VOCAB_SIZE - 1) int8
    accepting: np.ndarray  # (n_states,) bool
    dead: int = field(default=-1)

    def __post_init__(self) -> None:
        # plain lists: per-token stepping is much faster than numpy scalar indexing
        object.__setattr__(self, "_rows", self.table.tolist())
        object.__setattr__(self, "_accept", self.accepting.tolist())

    def run(self, seq: Sequence[int]) -> bool:
        state, rows, dead = 0, self._rows, self.dead
        for t in seq:
            state = rows[state][t]
            if state == dead:
                return False
        return self._accept[state]


def _build(rules: dict[int, list[tuple[str, int]]], accept: set[int]) -> Dfa:
    """Rules map state -> ordered (class, next) pairs; later pairs win.

    Unlisted transitions go to an implicit dead state.
    """
    n = max(max(rules), max(accept)) + 2
    dead = n - 1
    table = np.full((n, VOCAB_SIZE - 1), dead, dtype=np.int8)
    for state, pairs in rules.items():
        for cls, nxt in pairs:
            table[state, list(_CLASSES[cls])] = nxt
    accepting = np.zeros(n, dtype=bool)
    accepting[list(accept)] = True
    return Dfa(table=table, accepting=accepting, dead=dead)


def _think_answer_box(offset: int, first: str) -> dict[int, list[tuple[str, int]]]:
    # first: "Ti" builds  T A(B); "Ao" builds A(B).  Accepting state is offset+7.
    s = offset
    rules: dict[int, list[tuple[str, int]]] = {}
    if first == "Ti":
        rules[s] = [("Ti", s + 1)]
        rules[s + 1] = [("X", s + 1), ("Tc", s + 2)]
        rules[s + 2] = [("Ao", s + 3)]
    else:
        rules[s] = [("Ao", s + 3)]
    rules[s + 3] = [("X", s + 3), ("Bo", s + 4)]
    rules[s + 4] = [("D", s + 5)]
    rules[s + 5] = [("D", s + 5), ("Bc", s + 6)]
    rules[s + 6] = [("X", s + 6), ("Ac", s + 7)]
    rules[s + 7] = []
    return rules


_THINK_ANSWER = _build(_think_answer_box(0, "Ti"), {7})
_ANSWER_ONLY = _build(_think_answer_box(0, "Ao"), {7})

_BOX_ANYWHERE = _build(
    {
        0: [("*", 0), ("Bo", 1)],
        1: [("*", 0), ("Bo", 1), ("D", 2)],
        2: [("*", 0), ("Bo", 1), ("D", 2), ("Bc", 3)],
        3: [("*", 3)],
    },
    {3},
)

# The most recent <answer> is always the only live candidate, since only
# non-structural tokens may sit between it and the box.
_ANSWER_BOX_ANYWHERE = _build(
    {
        0: [("*", 0), ("Ao", 1)],
        1: [("*", 0), ("X", 1), ("Ao", 1), ("Bo", 2)],
        2: [("*", 0), ("Ao", 1), ("D", 3)],
        3: [("*", 0), ("Ao", 1), ("D", 3), ("Bc", 4)],
        4: [("*", 0), ("Ao", 1), ("X", 4), ("Ac", 5)],
        5: [("*", 5)],
    },
    {5},
)

_ENDS_WITH_BOX = _build(
    {
        0: [("*", 0), ("Bo", 1)],
        1: [("*", 0), ("Bo", 1), ("D", 2)],
        2: [("*", 0), ("Bo", 1), ("D", 2), ("Bc", 3)],
        3: [("*", 0), ("Bo", 1)],
    },
    {3},
)

# (T A)+  |  A (T A(B))*   where A is an answer block whose box is optional.
_COMPOSITE = _build(
    {
        0: [("Ti", 1), ("Ao", 10)],
        # think-led branch
        1: [("X", 1), ("Tc", 2)],
        2: [("Ao", 3)],
        3: [("X", 3), ("Bo", 4), ("Ac", 7)],
        4: [("D", 5)],
        5: [("D", 5), ("Bc", 6)],
        6: [("X", 6), ("Ac", 7)],
        7: [("Ti", 1)],
        # answer-led branch: leading block, box optional
        10: [("X", 10), ("Bo", 11), ("Ac", 14)],
        11: [("D", 12)],
        12: [("D", 12), ("Bc", 13)],
        13: [("X", 13), ("Ac", 14)],
        14: [("Ti", 15)],
        # ... then think + boxed answer, repeated
        15: [("X", 15), ("Tc", 16)],
        16: [("Ao", 17)],
        17: [("X", 17), ("Bo", 18)],
        18: [("D", 19)],
        19: [("D", 19), ("Bc", 20)],
        20: [("X", 20), ("Ac", 14)],
    },
    {7, 14},
)

RECOGNIZERS: dict[FormatId, Dfa] = {
    FormatId.STRICT: _THINK_ANSWER,
    FormatId.COMPOSITE: _COMPOSITE,
    FormatId.F1_NESTED: _BOX_ANYWHERE,
    FormatId.F2_NESTED: _ANSWER_BOX_ANYWHERE,
    FormatId.F3_NESTED: _THINK_ANSWER,
    FormatId.F1_EXCL: _ENDS_WITH_BOX,
    FormatId.F2_EXCL: _ANSWER_ONLY,
    FormatId.F3_EXCL: _THINK_ANSWER,
}


def matches(seq: Sequence[int], fmt: FormatId) -> bool:
    return RECOGNIZERS[FormatId(fmt)].run(strip_eos(seq))


def matched_formats(seq: Sequence[int], formats: Iterable[FormatId] = tuple(FormatId)) -> set[FormatId]:
    body = strip_eos(seq)
    return {f for f in formats if RECOGNIZERS[f].run(body)}


def extract_boxed(seq: Sequence[int]) -> str | None:
    """Digits inside the last well-formed ``\\boxed{`` digit+ ``}`` span."""
    found = None
    i, n = 0, len(seq)
    while i < n:
        if seq[i] == Tok.BOX_OPEN:
            j = i + 1
            while j < n and is_digit(seq[j]):
                j += 1
            if j > i + 1 and j < n and seq[j] == Tok.BOX_CLOSE:
                found = "".join(str(t - int(Tok.D0)) for t in seq[i + 1 : j])
                i = j + 1
                continue
            i = j if j > i + 1 else i + 1
        else:
            i += 1
    return found
