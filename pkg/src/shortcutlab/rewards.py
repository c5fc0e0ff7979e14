"""Reward channels and their combination into a scalar reward."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .formats import EXCLUSIVE, NESTED, FormatId, extract_boxed, matched_formats

CORRECT_REWARD = 3.0
INCORRECT_REWARD = -5.0
UNPARSABLE_REWARD = -5.0
FORMAT_PENALTY = -4.0
COMPOSITE_REWARD = 3.0
EXPONENTIAL_WEIGHTS = {FormatId.F1_NESTED: 1.0, FormatId.F2_NESTED: 2.0, FormatId.F3_NESTED: 4.0}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class SchemeKind(str, enum.Enum):
    STRICT_RUN = "StrictRun"
    COMPOSITE_RUN = "CompositeRun"
    HIERARCHY_FLAT = "HierarchyFlat"
    HIERARCHY_EXPONENTIAL = "HierarchyExponential"
    CONFLICT = "Conflict"


@dataclass
class RewardScheme:
    kind: SchemeKind
    r_max: float = 1.0
    weights: dict[FormatId, float] = field(default_factory=dict)
    penalties: dict[FormatId, float] = field(default_factory=dict)
    correctness_weight: float = 1.0
    # Conflict only: charged once when none of the exclusive formats match.
    no_match_penalty: float = 0.0

    @classmethod
    def default(cls, kind: SchemeKind | str, *, r_max: float = 1.0, correctness_weight: float | None = None) -> "RewardScheme":
        kind = SchemeKind(kind)
        if kind is SchemeKind.STRICT_RUN:
            w = {FormatId.STRICT: COMPOSITE_REWARD}
            p = {FormatId.STRICT: FORMAT_PENALTY}
            cw, nm = 1.0, 0.0
        elif kind is SchemeKind.COMPOSITE_RUN:
            w = {FormatId.COMPOSITE: COMPOSITE_REWARD}
            p = {FormatId.COMPOSITE: FORMAT_PENALTY}
            cw, nm = 1.0, 0.0
        elif kind is SchemeKind.HIERARCHY_FLAT:
            w = {f: r_max for f in NESTED}
            p = {f: FORMAT_PENALTY for f in NESTED}
            cw, nm = 0.0, 0.0
        elif kind is SchemeKind.HIERARCHY_EXPONENTIAL:
            w = dict(EXPONENTIAL_WEIGHTS)
            p = {f: FORMAT_PENALTY for f in NESTED}
            cw, nm = 0.0, 0.0
        else:
            w = {f: r_max for f in EXCLUSIVE}
            p = {f: 0.0 for f in EXCLUSIVE}
            cw, nm = 0.0, FORMAT_PENALTY
        if correctness_weight is not None:
            cw = correctness_weight
        scheme = cls(kind=kind, r_max=r_max, weights=w, penalties=p, correctness_weight=cw, no_match_penalty=nm)
        scheme.validate()
        return scheme

    @property
    def formats(self) -> tuple[FormatId, ...]:
        return tuple(self.weights)

    def validate(self) -> None:
        if set(self.weights) != set(self.penalties):
            raise ConfigError("weights and penalties must cover the same formats")
        if not self.weights:
            raise ConfigError("scheme has no format channels")
        if any(v <= 0 for v in self.weights.values()):
            raise ConfigError("format match rewards must be positive")
        if any(v > 0 for v in self.penalties.values()) or self.no_match_penalty > 0:
            raise ConfigError("penalties must be <= 0")
        if self.kind is SchemeKind.CONFLICT and set(self.weights) != set(EXCLUSIVE):
            raise ConfigError("Conflict scheme must use the exclusive formats")
        if self.kind in (SchemeKind.HIERARCHY_FLAT, SchemeKind.HIERARCHY_EXPONENTIAL) and set(self.weights) != set(NESTED):
            raise ConfigError(f"{self.kind.value} scheme must use the nested formats")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "r_max": self.r_max,
            "weights": {f.value: v for f, v in self.weights.items()},
            "penalties": {f.value: v for f, v in self.penalties.items()},
            "correctness_weight": self.correctness_weight,
            "no_match_penalty": self.no_match_penalty,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardScheme":
        unknown = set(d) - {"kind", "r_max", "weights", "penalties", "correctness_weight", "no_match_penalty"}
        if unknown:
            raise ConfigError(f"unknown scheme keys: {sorted(unknown)}")
        try:
            kind = SchemeKind(d["kind"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad scheme kind: {d.get('kind')!r}") from exc
        base = cls.default(kind, r_max=float(d.get("r_max", 1.0)))
        try:
            if "weights" in d:
                base.weights = {FormatId(k): float(v) for k, v in d["weights"].items()}
            if "penalties" in d:
                base.penalties = {FormatId(k): float(v) for k, v in d["penalties"].items()}
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if "correctness_weight" in d:
            base.correctness_weight = float(d["correctness_weight"])
        if "no_match_penalty" in d:
            base.no_match_penalty = float(d["no_match_penalty"])
        base.validate()
        return base


@dataclass
class RewardBreakdown:
    correctness: float
    per_format: dict[FormatId, float]
    total: float
    satisfied: set[FormatId]
    parsed_answer: str | None
    penalty: float = 0.0


def _same_number(a: str, b: str) -> bool:
    return int(a) == int(b)


def correctness_reward(seq: Sequence[int], truth: str) -> float:
    if not truth or not truth.isdigit():
        raise ValueError(f"truth must be a nonempty digit string, got {truth!r}")
    boxed = extract_boxed(seq)
    if boxed is None:
        return UNPARSABLE_REWARD
    return CORRECT_REWARD if _same_number(boxed, truth) else INCORRECT_REWARD


def format_reward(seq: Sequence[int], fmt: FormatId, scheme: RewardScheme, *, matched: bool | None = None) -> float:
    fmt = FormatId(fmt)
    if fmt not in scheme.weights:
        raise ConfigError(f"format {fmt.value} is not active in scheme {scheme.kind.value}")
    if matched is None:
        matched = bool(matched_formats(seq, (fmt,)))
    return scheme.weights[fmt] if matched else scheme.penalties[fmt]


def combine(breakdown: RewardBreakdown, scheme: RewardScheme) -> float:
    """The scalar total implied by a breakdown's channels."""
    return scheme.correctness_weight * breakdown.correctness + sum(breakdown.per_format.values()) + breakdown.penalty


def total_reward(seq: Sequence[int], truth: str, scheme: RewardScheme) -> RewardBreakdown:
    satisfied = matched_formats(seq, scheme.formats)
    per_format = {f: format_reward(seq, f, scheme, matched=f in satisfied) for f in scheme.formats}
    penalty = 0.0
    if scheme.kind is SchemeKind.CONFLICT and not satisfied:
        penalty = scheme.no_match_penalty
    bd = RewardBreakdown(
        correctness=correctness_reward(seq, truth),
        per_format=per_format,
        total=0.0,
        satisfied=satisfied,
        parsed_answer=extract_boxed(seq),
        penalty=penalty,
    )
    bd.total = combine(bd, scheme)
    return bd
