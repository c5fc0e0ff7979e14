"""Exhaustive / sampled checking of the nesting and disjointness contracts.

Sequences are enumerated over a reduced alphabet: the six delimiters, one
filler and a single representative digit.  Every recognizer treats all ten
digits identically, so nothing is lost by the reduction.  Trailing ``Eos``
is stripped before matching, so only Eos-free bodies are enumerated.

Lengths up to :data:`EXHAUSTIVE_MAX` are enumerated completely; longer
lengths (up to :data:`HARD_CAP`) are sampled uniformly at random.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .formats import EXCLUSIVE, NESTED, RECOGNIZERS, Dfa, FormatId, Tok, render

REDUCED_ALPHABET = (
    int(Tok.THINK_OPEN),
    int(Tok.THINK_CLOSE),
    int(Tok.ANSWER_OPEN),
    int(Tok.ANSWER_CLOSE),
    int(Tok.BOX_OPEN),
    int(Tok.BOX_CLOSE),
    int(Tok.FILLER),
    int(Tok.D7),
)
EXHAUSTIVE_MAX = 8
HARD_CAP = 14
DEFAULT_BOUND = 10
DEFAULT_SAMPLES = 10_000_000
_CHUNK = 1 << 19
_MAX_WITNESSES = 5


class EnumerationBoundError(ValueError):
    pass


@dataclass
class Phase:
    kind: str  # "exhaustive" or "sampled"
    lengths: list[int]
    sequences: int


@dataclass
class VerificationReport:
    check: str
    max_len: int
    phases: list[Phase] = field(default_factory=list)
    match_counts: dict[str, int] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)
    witnesses: dict[str, list[str]] = field(default_factory=dict)

    @property
    def counterexamples(self) -> int:
        return sum(self.violations.values())

    @property
    def ok(self) -> bool:
        return self.counterexamples == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counterexamples"] = self.counterexamples
        d["ok"] = self.ok
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"{self.check}: max_len={self.max_len}"]
        for ph in self.phases:
            span = f"{ph.lengths[0]}..{ph.lengths[-1]}" if ph.lengths else "-"
            lines.append(f"  phase {ph.kind:<10} lengths {span:<7} sequences {ph.sequences}")
        for name, n in self.match_counts.items():
            lines.append(f"  matches {name:<10} {n}")
        for name, n in self.violations.items():
            lines.append(f"  violations {name:<22} {n}")
            for w in self.witnesses.get(name, []):
                lines.append(f"    witness: {w}")
        lines.append(f"  counterexamples: {self.counterexamples}")
        return "\n".join(lines)


# (name, a, b): a nesting violation is a & ~b, an exclusivity violation a & b.
_NESTING_CHECKS = (
    ("F3Nested=>F2Nested", FormatId.F3_NESTED, FormatId.F2_NESTED),
    ("F2Nested=>F1Nested", FormatId.F2_NESTED, FormatId.F1_NESTED),
)
_EXCLUSIVITY_CHECKS = (
    ("F1Excl&F2Excl", FormatId.F1_EXCL, FormatId.F2_EXCL),
    ("F1Excl&F3Excl", FormatId.F1_EXCL, FormatId.F3_EXCL),
    ("F2Excl&F3Excl", FormatId.F2_EXCL, FormatId.F3_EXCL),
)


def _reduced_tables(recognizers: Mapping[FormatId, Dfa], formats) -> dict[FormatId, tuple[np.ndarray, np.ndarray]]:
    return {f: (recognizers[f].table[:, list(REDUCED_ALPHABET)], recognizers[f].accepting) for f in formats}


def _decode(index: int, length: int) -> str:
    syms = []
    for _ in range(length):
        syms.append(REDUCED_ALPHABET[index % 8])
        index //= 8
    return render(reversed(syms)) or "(empty)"


def _verify(check: str, pairs, formats, max_len: int, recognizers, n_samples: int, seed: int) -> VerificationReport:
    if max_len < 0:
        raise EnumerationBoundError("max_len must be non-negative")
    if max_len > HARD_CAP:
        raise EnumerationBoundError(f"max_len={max_len} exceeds the enumeration hard cap of {HARD_CAP}")
    recognizers = RECOGNIZERS if recognizers is None else recognizers
    tables = _reduced_tables(recognizers, formats)
    report = VerificationReport(check=check, max_len=max_len)
    report.match_counts = {f.value: 0 for f in formats}
    report.violations = {name: 0 for name, _, _ in pairs}
    overlap = check == "exclusivity"

    def tally(accept: dict[FormatId, np.ndarray], length: int, decode) -> None:
        for f in formats:
            report.match_counts[f.value] += int(accept[f].sum())
        for name, a, b in pairs:
            bad = accept[a] & accept[b] if overlap else accept[a] & ~accept[b]
            n_bad = int(bad.sum())
            if n_bad:
                report.violations[name] += n_bad
                wl = report.witnesses.setdefault(name, [])
                for idx in np.flatnonzero(bad)[: _MAX_WITNESSES - len(wl)]:
                    wl.append(decode(int(idx), length))

    # exhaustive phase: breadth-first over the trie of all bodies
    ex_top = min(max_len, EXHAUSTIVE_MAX)
    states = {f: np.zeros(1, dtype=np.int8) for f in formats}
    total = 0
    for length in range(ex_top + 1):
        if length:
            states = {f: tables[f][0][states[f]].reshape(-1) for f in formats}
        accept = {f: tables[f][1][states[f]] for f in formats}
        tally(accept, length, _decode)
        total += states[formats[0]].size
    report.phases.append(Phase("exhaustive", list(range(ex_top + 1)), total))
    del states

    # sampled phase for the remaining lengths
    lengths = list(range(EXHAUSTIVE_MAX + 1, max_len + 1))
    if lengths and n_samples > 0:
        rng = np.random.default_rng(seed)
        base, extra = divmod(n_samples, len(lengths))
        sampled = 0
        for i, length in enumerate(lengths):
            remaining = base + (i < extra)
            while remaining > 0:
                m = min(_CHUNK, remaining)
                syms = rng.integers(0, 8, size=(m, length), dtype=np.int8)
                accept = {}
                for f in formats:
                    table, acc = tables[f]
                    st = np.zeros(m, dtype=np.int8)
                    for col in range(length):
                        st = table[st, syms[:, col]]
                    accept[f] = acc[st]

                def decode(idx: int, _len: int, syms=syms) -> str:
                    return render(REDUCED_ALPHABET[s] for s in syms[idx])

                tally(accept, length, decode)
                remaining -= m
                sampled += m
        report.phases.append(Phase("sampled", lengths, sampled))
    return report


def verify_nesting(
    max_len: int = DEFAULT_BOUND,
    *,
    recognizers: Mapping[FormatId, Dfa] | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> VerificationReport:
    """Count sequences where F3Nested holds without F2Nested, or F2 without F1."""
    return _verify("nesting", _NESTING_CHECKS, NESTED, max_len, recognizers, n_samples, seed)


def verify_exclusivity(
    max_len: int = DEFAULT_BOUND,
    *,
    recognizers: Mapping[FormatId, Dfa] | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> VerificationReport:
    """Count sequences matched by two or more of the exclusive formats."""
    return _verify("exclusivity", _EXCLUSIVITY_CHECKS, EXCLUSIVE, max_len, recognizers, n_samples, seed)
