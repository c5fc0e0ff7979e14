import json

import numpy as np
import pytest

from shortcutlab.harness import (
    Experiment,
    RunConfig,
    apply_overrides,
    config_from_dict,
    default_config,
    load_config,
    moving_average,
    read_log,
    run_experiment,
    run_pair_kl_study,
    saturation_step,
)
from shortcutlab.optimizers import Algo, DivergenceError
from shortcutlab.policy import init_policy, load_checkpoint
from shortcutlab.rewards import ConfigError, RewardScheme, SchemeKind

FIELDS = {
    "step",
    "mean_total_reward",
    "mean_reward_per_format",
    "match_rates",
    "accuracy",
    "mean_completion_length",
    "kl_to_reference",
    "lr",
    "dropped_groups",
    "kept_groups",
    "resamples",
}


def short(experiment, tmp_path=None, steps=25, **opt):
    cfg = default_config(experiment, seed=3)
    cfg.steps = steps
    for k, v in opt.items():
        setattr(cfg.optimizer, k, v)
    if tmp_path is not None:
        cfg.out_dir = str(tmp_path)
    return cfg


def test_zero_steps(tmp_path):
    res = run_experiment(short("HierarchyFlat", tmp_path, steps=0))
    header, records = read_log(tmp_path / "log.jsonl")
    assert records == [] and header["experiment"] == "HierarchyFlat"
    policy, _ = load_checkpoint(tmp_path / "policy.ckpt")
    assert np.array_equal(policy.theta, init_policy(res.config.policy).theta)
    assert json.loads((tmp_path / "summary.json").read_text())["steps"] == 0


def test_log_contents(tmp_path):
    res = run_experiment(short("CompositeChoice", tmp_path))
    header, records = read_log(tmp_path / "log.jsonl")
    assert header["optimizer"]["algo"] == "DrGrpo"
    assert [r["step"] for r in records] == list(range(25))
    for r in records:
        assert set(r) == FIELDS
        assert r["kl_to_reference"] >= 0 and 0 <= r["accuracy"] <= 1
        assert set(r["mean_reward_per_format"]) == {"Composite"}
    assert records == res.records
    assert records[0]["lr"] == 0.0


def test_runs_are_byte_identical(tmp_path):
    run_experiment(short("Conflict", tmp_path / "a"))
    run_experiment(short("Conflict", tmp_path / "b"))
    assert (tmp_path / "a" / "log.jsonl").read_bytes() == (tmp_path / "b" / "log.jsonl").read_bytes()
    assert (tmp_path / "a" / "policy.ckpt").read_bytes() == (tmp_path / "b" / "policy.ckpt").read_bytes()


def test_dapo_groups_entering_update_are_mixed():
    seen = []
    cfg = short("CompositeChoice", steps=30)
    cfg.optimizer = cfg.optimizer.from_dict({**cfg.optimizer.to_dict(), "algo": "Dapo", "beta": 0.0})
    res = run_experiment(cfg, on_update=lambda step, groups: seen.extend(g.correct_count for g in groups), write_files=False)
    assert all(0 < c < 5 for c in seen)
    assert sum(r["dropped_groups"] for r in res.records) > 0


def test_reinforce_pp_runs():
    cfg = config_from_dict({"experiment": "Conflict", "optimizer": {"algo": "ReinforcePP"}, "steps": 10})
    assert cfg.optimizer.group_size == 1 and cfg.optimizer.ppo_epochs == 2
    res = run_experiment(cfg, write_files=False)
    assert len(res.records) == 10


def test_divergence_persists_partial_log(tmp_path):
    def corrupt(step, groups):
        if step == 2:
            groups[0].rollouts[0].logp_old[0] = -1e6

    with pytest.raises(DivergenceError):
        run_experiment(short("HierarchyFlat", tmp_path), on_update=corrupt)
    _, records = read_log(tmp_path / "log.jsonl")
    assert len(records) == 2
    assert json.loads((tmp_path / "summary.json").read_text())["diverged"] is True


def test_kl_pair_with_equal_betas_is_identical(tmp_path):
    cfg = short("KlLeash", tmp_path, steps=15)
    cfg.leash_betas = (0.3, 0.3)
    out = run_pair_kl_study(cfg)
    a, b = out["runs"]
    assert a.log_path.read_bytes() == b.log_path.read_bytes()
    assert set(out["comparison"]) == {"arm0_beta_0.3", "arm1_beta_0.3"}
    assert (tmp_path / "comparison.json").exists()


def test_kl_pair_requires_leash_experiment():
    with pytest.raises(ConfigError):
        run_pair_kl_study(short("Conflict"))
    cfg = short("KlLeash")
    cfg.leash_betas = (0.1, 0.5)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_experiment_determines_scheme():
    cfg = default_config("HierarchyFlat")
    cfg.scheme = RewardScheme.default(SchemeKind.CONFLICT)
    with pytest.raises(ConfigError, match="requires scheme"):
        cfg.validate()
    assert default_config("KlLeash").scheme.kind is SchemeKind.COMPOSITE_RUN


def test_overrides_and_loading(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "Conflict", "steps": 5}))
    cfg = load_config(path, ["seed=9", "optimizer.algo=ReinforcePP", "policy.max_len=8", "scheme.r_max=2.0"])
    assert cfg.seed == 9 and cfg.optimizer.algo is Algo.REINFORCE_PP and cfg.policy.max_len == 8
    assert cfg.scheme.r_max == 2.0
    for bad in ("bogus=1", "optimizer.bogus=1", "policy.nope=2", "seed"):
        with pytest.raises(ConfigError):
            load_config(path, [bad])
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "Nope"})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    raw = apply_overrides({}, ["optimizer.beta=0.3"])
    assert raw == {"optimizer": {"beta": 0.3}}


def test_config_roundtrip():
    for exp in Experiment:
        cfg = default_config(exp)
        again = config_from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()


def test_moving_average_and_saturation():
    x = [0, 0, 1, 1, 1, 1]
    assert np.allclose(moving_average(x, 2), [0, 0, 0.5, 1, 1, 1])
    assert saturation_step(x, 1.0, window=2) == 3
    assert saturation_step(x, 1.0, window=10) is None
    assert saturation_step([0.95] * 20, 1.0) == 19
    assert saturation_step([0.9] * 30, 1.0) is None  # must exceed 90%
    assert saturation_step([1.9] * 25, 2.0) == 19
