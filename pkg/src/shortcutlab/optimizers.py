"""Dr.GRPO, DAPO and REINFORCE++ update rules for the tabular policy.

Gradients returned here are gradients of the *loss* (negated clipped
surrogate plus the KL penalty), ready for a descent step.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .env import ToyTask
from .policy import PolicyTable, Rollout, rollout_states, score_gradient, token_logps
from .rewards import ConfigError


class DivergenceError(FloatingPointError):
    """Non-finite values in a ratio, gradient or parameter."""


class Algo(str, enum.Enum):
    DR_GRPO = "DrGrpo"
    DAPO = "Dapo"
    REINFORCE_PP = "ReinforcePP"


_ALGO_DEFAULTS = {
    Algo.DR_GRPO: dict(eps_high=0.2, beta=0.1, lr=5e-6, group_size=5, ppo_epochs=1, adv_norm=False, reward_norm=False),
    Algo.DAPO: dict(eps_high=0.28, beta=0.0, lr=5e-6, group_size=5, ppo_epochs=1, adv_norm=False, reward_norm=False),
    Algo.REINFORCE_PP: dict(eps_high=0.2, beta=0.0, lr=5e-5, group_size=1, ppo_epochs=2, adv_norm=True, reward_norm=True),
}


@dataclass
class OptimizerConfig:
    algo: Algo = Algo.DR_GRPO
    eps_low: float = 0.2
    eps_high: float = 0.2
    beta: float = 0.1
    lr: float = 5e-6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    weight_decay: float = 0.1
    warmup_ratio: float = 0.1
    max_grad_norm: float = 0.15
    batch_size: int = 8
    group_size: int = 5
    ppo_epochs: int = 1
    adv_norm: bool = False
    reward_norm: bool = False
    reward_norm_window: int = 512
    resample_budget: int = 3

    @classmethod
    def default(cls, algo: Algo | str = Algo.DR_GRPO, **overrides) -> "OptimizerConfig":
        algo = Algo(algo)
        cfg = cls(algo=algo, **{**_ALGO_DEFAULTS[algo], **overrides})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not (0 < self.eps_low < 1 and 0 < self.eps_high < 1):
            raise ConfigError("clip ranges must lie in (0, 1)")
        if self.beta < 0 or self.lr <= 0 or self.weight_decay < 0 or self.max_grad_norm <= 0:
            raise ConfigError("beta, weight_decay must be >= 0; lr, max_grad_norm > 0")
        if self.batch_size < 1 or self.ppo_epochs < 1 or not 0 <= self.warmup_ratio < 1:
            raise ConfigError("batch_size and ppo_epochs must be >= 1, warmup_ratio in [0, 1)")
        if self.algo is Algo.REINFORCE_PP:
            if self.group_size < 1:
                raise ConfigError("group_size must be >= 1")
        elif self.group_size < 2:
            raise ConfigError(f"{self.algo.value} needs group_size >= 2 for a group baseline")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algo"] = self.algo.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
        try:
            algo = Algo(d.get("algo", Algo.DR_GRPO))
        except ValueError as exc:
            raise ConfigError(f"unknown algo {d.get('algo')!r}") from exc
        return cls.default(algo, **{k: v for k, v in d.items() if k != "algo"})


@dataclass
class RolloutGroup:
    task: ToyTask
    rollouts: list[Rollout]
    rewards: np.ndarray
    correct: np.ndarray  # bool per rollout, is_equivalent(answer, o_i)
    advantages: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def size(self) -> int:
        return len(self.rollouts)

    @property
    def correct_count(self) -> int:
        return int(np.count_nonzero(self.correct))


def compute_advantages(group: RolloutGroup) -> RolloutGroup:
    """Reward minus the group mean, with no division by the group std."""
    if group.size < 2:
        raise ConfigError("group baseline needs at least two rollouts")
    r = np.asarray(group.rewards, dtype=float)
    group.advantages = r - r.mean()
    return group


class RunningRewardNorm:
    """z-score against the last ``window`` rewards seen."""

    def __init__(self, window: int = 512):
        self.buf: deque[float] = deque(maxlen=window)

    def __call__(self, rewards: np.ndarray) -> np.ndarray:
        self.buf.extend(float(r) for r in rewards)
        hist = np.fromiter(self.buf, dtype=float)
        std = hist.std()
        return (rewards - hist.mean()) / (std if std > 1e-8 else 1.0)


def batch_advantages(groups: Sequence[RolloutGroup], *, adv_norm: bool, reward_norm: RunningRewardNorm | None = None) -> None:
    """REINFORCE++ advantages: batch-mean baseline, optional normalisation."""
    rewards = np.concatenate([np.asarray(g.rewards, dtype=float) for g in groups])
    if reward_norm is not None:
        rewards = reward_norm(rewards)
    adv = rewards - rewards.mean()
    if adv_norm and adv.size > 1:
        std = adv.std()
        if std > 1e-8:
            adv = adv / std
    start = 0
    for g in groups:
        g.advantages = adv[start : start + g.size]
        start += g.size


def dynamic_sampling_filter(
    groups: Sequence[RolloutGroup],
    resample: Callable[[int], RolloutGroup] | None = None,
    budget: int = 3,
) -> tuple[list[RolloutGroup], list[RolloutGroup], int]:
    """Keep groups with 0 < correct-count < G; refill dropped slots.

    ``resample(slot)`` draws a fresh group for a batch slot.  Each slot gets
    at most ``budget`` attempts before it is skipped for this step.
    Returns (kept, dropped, resamples used).
    """
    kept: list[RolloutGroup] = []
    dropped: list[RolloutGroup] = []
    used = 0
    for slot, g in enumerate(groups):
        attempts = 0
        while not 0 < g.correct_count < g.size:
            dropped.append(g)
            if resample is None or attempts >= budget:
                g = None
                break
            g = resample(slot)
            attempts += 1
            used += 1
        if g is not None:
            kept.append(g)
    return kept, dropped, used


def clipped_surrogate_terms(ratio: np.ndarray, adv: np.ndarray, eps_low: float, eps_high: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-token ``min(r A, clip(r, 1-eps_low, 1+eps_high) A)`` and where it depends on r."""
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps_low, 1.0 + eps_high) * adv
    value = np.minimum(unclipped, clipped)
    active = unclipped <= clipped
    return value, active


def kl_estimator(logp_current: np.ndarray, logp_ref: np.ndarray) -> np.ndarray:
    d = logp_ref - logp_current
    # expm1 avoids cancellation for small d; the clamp absorbs the last ulp
    return np.maximum(np.expm1(d) - d, 0.0)


def token_weights(groups: Sequence[RolloutGroup], algo: Algo) -> list[np.ndarray]:
    """Aggregation weight of each token of each rollout, per group."""
    out = []
    n_groups = len(groups)
    n_rollouts = sum(g.size for g in groups)
    for g in groups:
        lens = np.array([len(r) for r in g.rollouts], dtype=float)
        if algo is Algo.DR_GRPO:
            w = 1.0 / (g.size * lens * n_groups)
        elif algo is Algo.DAPO:
            w = np.full(g.size, 1.0 / (lens.sum() * n_groups))
        else:
            w = np.full(g.size, 1.0 / n_rollouts)
        out.append(w)
    return out


def surrogate_gradient(
    groups: Sequence[RolloutGroup],
    config: OptimizerConfig,
    policy: PolicyTable,
    reference: PolicyTable | None = None,
    stats: dict | None = None,
) -> np.ndarray:
    if not groups:
        return np.zeros_like(policy.theta)
    rollouts = [r for g in groups for r in g.rollouts]
    st = rollout_states(policy, rollouts)
    adv_seq = np.concatenate([g.advantages for g in groups])
    w_seq = np.concatenate(token_weights(groups, config.algo))
    adv, w = adv_seq[st.row], w_seq[st.row]
    n_dec = policy.config.max_len - 1
    old = np.concatenate([r.logp_old[: min(len(r), n_dec)] for r in rollouts])
    cur = token_logps(policy, st)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(cur - old)
    if not np.all(np.isfinite(ratio)):
        bad = int(np.flatnonzero(~np.isfinite(ratio))[0])
        raise DivergenceError(f"non-finite importance ratio at token {bad} (rollout {int(st.row[bad])})")
    _, active = clipped_surrogate_terms(ratio, adv, config.eps_low, config.eps_high)
    coef = -w * adv * ratio * active
    if config.beta > 0:
        if reference is None:
            raise ConfigError("beta > 0 needs a reference policy")
        ref = token_logps(reference, st)
        coef += config.beta * w * (1.0 - np.exp(ref - cur))
    if stats is not None:
        stats["clip_fraction"] = float(1.0 - active.mean()) if active.size else 0.0
        stats["tokens"] = int(active.size)
    grad = score_gradient(policy, st, coef)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    return grad


def lr_at(step: int, total_steps: int, peak: float, warmup_ratio: float) -> float:
    """Linear warmup then cosine decay to zero."""
    warmup = math.ceil(warmup_ratio * total_steps)
    if step < warmup:
        return peak * step / warmup
    if total_steps <= warmup:
        return peak
    progress = min(1.0, (step - warmup) / (total_steps - warmup))
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


class AdamW:
    """Adam moments with decoupled weight decay, applied in place to ``policy.theta``."""

    def __init__(self, config: OptimizerConfig, total_steps: int, size: int):
        self.config = config
        self.total_steps = total_steps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def apply_update(self, policy: PolicyTable, grad: np.ndarray, step: int) -> PolicyTable:
        cfg = self.config
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("non-finite gradient passed to the optimizer")
        grad, _ = clip_grad_norm(grad, cfg.max_grad_norm)
        lr = lr_at(step, self.total_steps, cfg.lr, cfg.warmup_ratio)
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        self.m = b1 * self.m + (1 - b1) * grad
        self.v = b2 * self.v + (1 - b2) * grad * grad
        m_hat = self.m / (1 - b1**self.t)
        v_hat = self.v / (1 - b2**self.t)
        theta = policy.theta
        theta *= 1.0 - lr * cfg.weight_decay
        theta -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError("parameters became non-finite")
        return policy


def apply_update(policy: PolicyTable, grad: np.ndarray, optimizer: AdamW, step: int) -> PolicyTable:
    return optimizer.apply_update(policy, grad, step)
