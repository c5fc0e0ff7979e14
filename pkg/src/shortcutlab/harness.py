"""Run configs, the training loop, run logs and run summaries."""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .env import ToyTask, is_equivalent, sample_tasks
from .formats import FormatId, matched_formats
from .optimizers import (
    AdamW,
    Algo,
    DivergenceError,
    OptimizerConfig,
    RolloutGroup,
    RunningRewardNorm,
    batch_advantages,
    compute_advantages,
    dynamic_sampling_filter,
    lr_at,
    surrogate_gradient,
)
from .policy import PolicyConfig, PolicyTable, init_policy, kl_to_reference, sample_batch, save_checkpoint
from .rewards import ConfigError, RewardScheme, SchemeKind, total_reward

SATURATION_FRACTION = 0.9
SMOOTHING_WINDOW = 20
FINAL_WINDOW = 50
LEASH_BETAS = (0.1, 0.3)
ANSWER_ONLY = "AnswerOnly"


class Experiment(str, enum.Enum):
    STRICT_BASELINE = "StrictBaseline"
    COMPOSITE_CHOICE = "CompositeChoice"
    HIERARCHY_FLAT = "HierarchyFlat"
    EXPONENTIAL_GAMBIT = "ExponentialGambit"
    CONFLICT = "Conflict"
    KL_LEASH = "KlLeash"


SCHEME_FOR = {
    Experiment.STRICT_BASELINE: SchemeKind.STRICT_RUN,
    Experiment.COMPOSITE_CHOICE: SchemeKind.COMPOSITE_RUN,
    Experiment.HIERARCHY_FLAT: SchemeKind.HIERARCHY_FLAT,
    Experiment.EXPONENTIAL_GAMBIT: SchemeKind.HIERARCHY_EXPONENTIAL,
    Experiment.CONFLICT: SchemeKind.CONFLICT,
    Experiment.KL_LEASH: SchemeKind.COMPOSITE_RUN,
}

# Step sizes for the tabular toy.  The LLM-scale defaults (5e-6 / 5e-5) are tuned
# for LoRA on billion-parameter models and barely move a logit table in 1000
# steps.  The toy presets raise the step size and shrink the decoupled weight
# decay by the same factor, so the per-step decay lr * wd stays at its
# LLM-scale value instead of dominating the logits.
TOY_LR = 0.5
# The leash study needs a gentler step: at 0.5 both arms collapse onto a
# deterministic policy within a few dozen steps, where the sampled-token KL
# gradient vanishes and beta no longer matters.
TOY_LR_FOR = {Experiment.KL_LEASH: 0.05}


def toy_overrides(experiment: Experiment, algo: Algo) -> dict:
    base = OptimizerConfig.default(algo)
    lr = TOY_LR_FOR.get(Experiment(experiment), TOY_LR)
    return {"lr": lr, "weight_decay": float(f"{base.weight_decay * base.lr / lr:.6g}")}


_TOP_KEYS = {"experiment", "scheme", "optimizer", "policy", "steps", "seed", "out_dir", "leash_betas"}
_POLICY_KEYS = {"n_tasks", "vocab_size", "k", "max_len", "shared_table"}


@dataclass
class RunConfig:
    experiment: Experiment
    scheme: RewardScheme
    optimizer: OptimizerConfig
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    steps: int = 1000
    seed: int = 0
    out_dir: str | None = None
    leash_betas: tuple[float, float] = LEASH_BETAS

    def validate(self) -> None:
        if self.scheme.kind is not SCHEME_FOR[self.experiment]:
            raise ConfigError(
                f"experiment {self.experiment.value} requires scheme {SCHEME_FOR[self.experiment].value}, "
                f"got {self.scheme.kind.value}"
            )
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.experiment is Experiment.KL_LEASH:
            if len(self.leash_betas) != 2 or any(b not in LEASH_BETAS for b in self.leash_betas):
                raise ConfigError(f"KlLeash needs a pair of betas drawn from {LEASH_BETAS}")
        self.scheme.validate()
        self.optimizer.validate()

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment.value,
            "scheme": self.scheme.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "policy": asdict(self.policy),
            "steps": self.steps,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "leash_betas": list(self.leash_betas),
        }

    def replace(self, **changes) -> "RunConfig":
        new = copy.deepcopy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        return new


def default_config(experiment: Experiment | str, *, algo: Algo | str | None = None, seed: int = 0) -> RunConfig:
    exp = Experiment(experiment)
    algo = Algo(algo) if algo is not None else Algo.DR_GRPO
    opt = OptimizerConfig.default(algo, **toy_overrides(exp, algo))
    cfg = RunConfig(experiment=exp, scheme=RewardScheme.default(SCHEME_FOR[exp]), optimizer=opt, seed=seed)
    cfg.validate()
    return cfg


def config_from_dict(raw: dict) -> RunConfig:
    """Resolve a (possibly partial) config dict against the experiment preset.

    Optimizer defaults follow the chosen algorithm, so overriding only
    ``optimizer.algo`` picks up that algorithm's group size, epochs etc.
    """
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        exp = Experiment(raw["experiment"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"missing or unknown experiment: {raw.get('experiment')!r}") from exc

    opt_raw = dict(raw.get("optimizer", {}))
    try:
        algo = Algo(opt_raw.pop("algo", Algo.DR_GRPO))
    except ValueError as exc:
        raise ConfigError(f"unknown algo {raw['optimizer'].get('algo')!r}") from exc
    opt = OptimizerConfig.from_dict({"algo": algo, **toy_overrides(exp, algo), **opt_raw})

    scheme_raw = dict(raw.get("scheme", {}))
    scheme_raw.setdefault("kind", SCHEME_FOR[exp].value)
    scheme = RewardScheme.from_dict(scheme_raw)

    pol_raw = dict(raw.get("policy", {}))
    if set(pol_raw) - _POLICY_KEYS:
        raise ConfigError(f"unknown policy keys: {sorted(set(pol_raw) - _POLICY_KEYS)}")
    try:
        pol = PolicyConfig(**pol_raw)
        cfg = RunConfig(
            experiment=exp,
            scheme=scheme,
            optimizer=opt,
            policy=pol,
            steps=int(raw.get("steps", 1000)),
            seed=int(raw.get("seed", 0)),
            out_dir=raw.get("out_dir"),
            leash_betas=tuple(float(b) for b in raw.get("leash_betas", LEASH_BETAS)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    nested_ok = {"scheme", "optimizer", "policy"}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.split(".")
        if parts[0] not in _TOP_KEYS or (len(parts) > 1 and parts[0] not in nested_ok):
            raise ConfigError(f"unknown config key: {key}")
        if parts[0] == "optimizer" and len(parts) == 2 and parts[1] not in OptimizerConfig.__dataclass_fields__:
            raise ConfigError(f"unknown config key: {key}")
        if parts[0] == "policy" and len(parts) == 2 and parts[1] not in _POLICY_KEYS:
            raise ConfigError(f"unknown config key: {key}")
        if parts[0] == "scheme" and parts[1] not in RewardScheme.__dataclass_fields__:
            raise ConfigError(f"unknown config key: {key}")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"unknown config key: {key}")
        node[parts[-1]] = value
    return raw


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(apply_overrides(raw, overrides))


# --- metrics ------------------------------------------------------------------


def channel_name(fmt: FormatId) -> str:
    return fmt.value


def moving_average(series: Sequence[float], window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x
    c = np.cumsum(np.insert(x, 0, 0.0))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def saturation_step(
    series: Sequence[float], maximum: float, window: int = SMOOTHING_WINDOW, fraction: float = SATURATION_FRACTION
) -> int | None:
    """First index whose full trailing ``window`` mean exceeds ``fraction * maximum``."""
    x = np.asarray(series, dtype=float)
    if x.size < window:
        return None
    c = np.cumsum(np.insert(x, 0, 0.0))
    ma = (c[window:] - c[:-window]) / window
    hit = np.flatnonzero(ma > fraction * maximum)
    return int(hit[0] + window - 1) if hit.size else None


def summarize(records: Sequence[dict], scheme: RewardScheme) -> dict:
    channels = [channel_name(f) for f in scheme.formats]
    maxima = {channel_name(f): scheme.weights[f] for f in scheme.formats}
    sat = {}
    for ch in channels:
        step = saturation_step([r["mean_reward_per_format"][ch] for r in records], maxima[ch])
        sat[ch] = None if step is None else int(records[step]["step"])
    tail = records[-FINAL_WINDOW:]

    def tail_mean(get) -> float | None:
        return float(np.mean([get(r) for r in tail])) if tail else None

    return {
        "steps": len(records),
        "channel_max": maxima,
        "saturation_step": sat,
        "final_window": min(FINAL_WINDOW, len(records)),
        "final_reward": tail_mean(lambda r: r["mean_total_reward"]),
        "final_kl": tail_mean(lambda r: r["kl_to_reference"]),
        "final_length": tail_mean(lambda r: r["mean_completion_length"]),
        "final_accuracy": tail_mean(lambda r: r["accuracy"]),
        "final_format_rewards": {ch: tail_mean(lambda r, ch=ch: r["mean_reward_per_format"][ch]) for ch in channels},
        "final_match_rates": {k: tail_mean(lambda r, k=k: r["match_rates"][k]) for k in (tail[0]["match_rates"] if tail else {})},
        "initial_length": records[0]["mean_completion_length"] if records else None,
    }


def read_log(path: str | Path) -> tuple[dict, list[dict]]:
    """Return (header, step records) of a JSONL run log."""
    header: dict = {}
    records = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if "header" in rec:
                header = rec["header"]
            else:
                records.append(rec)
    return header, records


# --- training loop ------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    records: list[dict]
    summary: dict
    policy: PolicyTable
    log_path: Path | None = None
    checkpoint_path: Path | None = None


class _LogWriter:
    def __init__(self, path: Path | None, header: dict):
        self.fh = None
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.fh = open(path, "w")
            self.write({"header": header})

    def write(self, rec: dict) -> None:
        if self.fh is not None:
            self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self.fh.flush()

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _score(rollouts, task: ToyTask, scheme: RewardScheme):
    rewards, correct, matched = [], [], []
    for r in rollouts:
        bd = total_reward(r.tokens, task.answer, scheme)
        rewards.append(bd.total)
        correct.append(is_equivalent(task.answer, r.tokens))
        matched.append((bd, matched_formats(r.tokens)))
    return np.array(rewards), np.array(correct, dtype=bool), matched


def run_experiment(
    config: RunConfig,
    *,
    on_update: Callable[[int, list[RolloutGroup]], None] | None = None,
    write_files: bool = True,
) -> RunResult:
    """Train for ``config.steps`` steps, logging one record per step.

    ``on_update(step, groups)`` sees exactly the groups that feed each gradient.
    """
    config.validate()
    cfg, opt_cfg = config, config.optimizer
    out_dir = Path(cfg.out_dir) if (cfg.out_dir and write_files) else None
    log_path = out_dir / "log.jsonl" if out_dir else None
    ckpt_path = out_dir / "policy.ckpt" if out_dir else None

    rng = np.random.default_rng(cfg.seed)
    policy = init_policy(cfg.policy)
    reference = policy.frozen()
    optimizer = AdamW(opt_cfg, cfg.steps, policy.theta.size)
    reward_norm = RunningRewardNorm(opt_cfg.reward_norm_window) if opt_cfg.reward_norm else None
    G = opt_cfg.group_size
    channels = [(f, channel_name(f)) for f in cfg.scheme.formats]

    def draw_groups(tasks: list[ToyTask]) -> tuple[list[RolloutGroup], list]:
        rollouts = sample_batch(policy, [t.task_id for t in tasks for _ in range(G)], rng)
        groups, scored = [], []
        for i, task in enumerate(tasks):
            chunk = rollouts[i * G : (i + 1) * G]
            rewards, correct, matched = _score(chunk, task, cfg.scheme)
            groups.append(RolloutGroup(task, chunk, rewards, correct))
            scored.extend(matched)
        return groups, scored

    records: list[dict] = []
    # out_dir is where the log lives, not part of what produced it
    header = {k: v for k, v in cfg.to_dict().items() if k != "out_dir"}
    writer = _LogWriter(log_path, header)
    try:
        for step in range(cfg.steps):
            lr = lr_at(step, cfg.steps, opt_cfg.lr, opt_cfg.warmup_ratio)
            groups, scored = draw_groups(sample_tasks(rng, opt_cfg.batch_size))
            rollouts = [r for g in groups for r in g.rollouts]
            n = len(rollouts)

            rec = {
                "step": step,
                "mean_total_reward": float(np.mean([g.rewards.mean() for g in groups])),
                "mean_reward_per_format": {ch: sum(bd.per_format[f] for bd, _ in scored) / n for f, ch in channels},
                "match_rates": {f.value: sum(f in m for _, m in scored) / n for f in FormatId},
                "accuracy": float(np.mean(np.concatenate([g.correct for g in groups]))),
                "mean_completion_length": float(np.mean([len(r.tokens) - 1 for r in rollouts])),
                "kl_to_reference": kl_to_reference(policy, reference, rollouts),
                "lr": lr,
            }
            rec["match_rates"][ANSWER_ONLY] = (
                sum(FormatId.COMPOSITE in m and FormatId.STRICT not in m for _, m in scored) / n
            )

            if opt_cfg.algo is Algo.DAPO:
                kept, dropped, used = dynamic_sampling_filter(
                    groups,
                    resample=lambda slot: draw_groups(sample_tasks(rng, 1))[0][0],
                    budget=opt_cfg.resample_budget,
                )
                groups = kept
                rec.update(dropped_groups=len(dropped), resamples=used, kept_groups=len(kept))
            else:
                rec.update(dropped_groups=0, resamples=0, kept_groups=len(groups))

            if groups:
                if opt_cfg.algo is Algo.REINFORCE_PP:
                    batch_advantages(groups, adv_norm=opt_cfg.adv_norm, reward_norm=reward_norm)
                else:
                    for g in groups:
                        compute_advantages(g)
            if on_update is not None:
                on_update(step, groups)
            beta_ref = reference if opt_cfg.beta > 0 else None
            for _ in range(opt_cfg.ppo_epochs):
                grad = surrogate_gradient(groups, opt_cfg, policy, beta_ref)
                optimizer.apply_update(policy, grad, step)

            records.append(rec)
            writer.write(rec)
    except DivergenceError:
        writer.close()
        if out_dir:
            (out_dir / "summary.json").write_text(
                json.dumps({"diverged": True, **summarize(records, cfg.scheme)}, indent=2, sort_keys=True)
            )
        raise
    writer.close()

    summary = {"diverged": False, **summarize(records, cfg.scheme)}
    if out_dir:
        save_checkpoint(policy, ckpt_path, seed=cfg.seed)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return RunResult(cfg, records, summary, policy, log_path, ckpt_path)


def run_pair_kl_study(config: RunConfig, *, write_files: bool = True) -> dict:
    """Two runs identical except for the KL coefficient."""
    if config.experiment is not Experiment.KL_LEASH:
        raise ConfigError("run_pair_kl_study needs experiment KlLeash")
    config.validate()
    runs = []
    for i, beta in enumerate(config.leash_betas):
        arm = config.replace(optimizer=_with_beta(config.optimizer, beta))
        if config.out_dir:
            arm.out_dir = str(Path(config.out_dir) / f"arm{i}_beta_{beta}")
        runs.append(run_experiment(arm, write_files=write_files))
    comparison = {
        f"arm{i}_beta_{r.config.optimizer.beta}": {
            "beta": r.config.optimizer.beta,
            "final_kl": r.summary["final_kl"],
            "final_reward": r.summary["final_reward"],
            "final_length": r.summary["final_length"],
            "initial_length": r.summary["initial_length"],
        }
        for i, r in enumerate(runs)
    }
    if config.out_dir and write_files:
        Path(config.out_dir, "comparison.json").write_text(json.dumps(comparison, indent=2, sort_keys=True))
    return {"runs": runs, "comparison": comparison}


def _with_beta(opt: OptimizerConfig, beta: float) -> OptimizerConfig:
    new = copy.deepcopy(opt)
    new.beta = beta
    return new
