import pytest

from shortcutlab.formats import EXCLUSIVE, NESTED, FormatId, parse
from shortcutlab.rewards import (
    ConfigError,
    RewardScheme,
    SchemeKind,
    combine,
    correctness_reward,
    format_reward,
    total_reward,
)

THINK_ANSWER = parse("<think> _ </think> <answer> \\boxed{ 12 } </answer>")
ANSWER_ONLY = parse("<answer> \\boxed{ 12 } </answer>")
BOX_ONLY = parse("_ \\boxed{ 12 }")
NOTHING = parse("_ _ 1")


def test_correctness_values():
    assert correctness_reward(BOX_ONLY, "12") == 3.0
    assert correctness_reward(BOX_ONLY, "13") == -5.0
    assert correctness_reward(NOTHING, "12") == -5.0
    assert correctness_reward(parse("\\boxed{ 0 1 2 }"), "12") == 3.0  # numeric equivalence
    with pytest.raises(ValueError):
        correctness_reward(BOX_ONLY, "")


def test_strict_and_composite_values():
    strict = RewardScheme.default(SchemeKind.STRICT_RUN)
    comp = RewardScheme.default(SchemeKind.COMPOSITE_RUN)
    assert format_reward(THINK_ANSWER, FormatId.STRICT, strict) == 3.0
    assert format_reward(ANSWER_ONLY, FormatId.STRICT, strict) == -4.0
    assert format_reward(ANSWER_ONLY, FormatId.COMPOSITE, comp) == 3.0
    assert format_reward(NOTHING, FormatId.COMPOSITE, comp) == -4.0
    assert total_reward(ANSWER_ONLY, "12", comp).total == 6.0
    assert total_reward(parse("<answer> </answer>"), "12", comp).total == -2.0


def test_hierarchy_values_and_sum_rule():
    exp = RewardScheme.default(SchemeKind.HIERARCHY_EXPONENTIAL)
    bd = total_reward(THINK_ANSWER, "12", exp)
    assert {f: bd.per_format[f] for f in NESTED} == {FormatId.F1_NESTED: 1.0, FormatId.F2_NESTED: 2.0, FormatId.F3_NESTED: 4.0}
    assert sum(bd.per_format.values()) == 7.0
    assert bd.total == 7.0  # correctness weight is 0 for the hierarchy presets
    assert total_reward(NOTHING, "12", exp).total == -12.0
    assert total_reward(ANSWER_ONLY, "12", exp).total == 1.0 + 2.0 - 4.0


def test_flat_hierarchy_uses_r_max():
    flat = RewardScheme.default(SchemeKind.HIERARCHY_FLAT, r_max=2.5)
    assert total_reward(THINK_ANSWER, "12", flat).total == 7.5
    assert total_reward(BOX_ONLY, "12", flat).total == 2.5 - 8.0


def test_conflict_single_channel():
    conf = RewardScheme.default(SchemeKind.CONFLICT)
    bd = total_reward(ANSWER_ONLY, "12", conf)
    assert bd.total == 1.0 and bd.satisfied == {FormatId.F2_EXCL}
    assert total_reward(BOX_ONLY, "12", conf).total == 1.0
    assert total_reward(NOTHING, "12", conf).total == -4.0
    for seq in (THINK_ANSWER, ANSWER_ONLY, BOX_ONLY, NOTHING):
        assert sum(v > 0 for v in total_reward(seq, "12", conf).per_format.values()) <= 1


def test_correctness_weight_is_linear():
    s = RewardScheme.default(SchemeKind.HIERARCHY_FLAT, correctness_weight=1.0)
    bd = total_reward(BOX_ONLY, "12", s)
    assert bd.total == 3.0 + 1.0 - 4.0 - 4.0
    assert combine(bd, s) == bd.total


def test_format_not_in_scheme():
    with pytest.raises(ConfigError):
        format_reward(BOX_ONLY, FormatId.STRICT, RewardScheme.default(SchemeKind.CONFLICT))


def test_scheme_roundtrip_and_validation():
    for kind in SchemeKind:
        s = RewardScheme.default(kind)
        assert RewardScheme.from_dict(s.to_dict()) == s
    with pytest.raises(ConfigError):
        RewardScheme.from_dict({"kind": "HierarchyFlat", "bogus": 1})
    with pytest.raises(ConfigError):
        RewardScheme.from_dict({"kind": "Nope"})
    with pytest.raises(ConfigError):
        RewardScheme.from_dict({"kind": "Conflict", "weights": {"F1Nested": 1.0}, "penalties": {"F1Nested": 0.0}})
    with pytest.raises(ConfigError):
        RewardScheme.from_dict({"kind": "HierarchyFlat", "penalties": {f.value: 1.0 for f in NESTED}})
    assert set(RewardScheme.default(SchemeKind.CONFLICT).formats) == set(EXCLUSIVE)
