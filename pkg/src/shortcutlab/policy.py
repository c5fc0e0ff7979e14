"""Tabular softmax policy over tokens, conditioned on task id and the last k tokens.

Logits for a state are ``task_table[task, ctx] + shared_table[ctx]``; the
shared table (on by default) lets format structure generalise across tasks
while the task table carries task-specific content such as answer digits.
All parameters live in one flat vector ``theta`` so optimizers and gradient
checks see a single array.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .formats import VOCAB_SIZE, Tok


@dataclass(frozen=True)
class PolicyConfig:
    n_tasks: int = 100
    vocab_size: int = VOCAB_SIZE  # the last token id is Eos
    k: int = 1
    max_len: int = 16
    shared_table: bool = True

    def __post_init__(self) -> None:
        if self.k < 1 or self.max_len < 1 or self.vocab_size < 2 or self.n_tasks < 1:
            raise ValueError(f"invalid policy config {self}")


class PolicyTable:
    def __init__(self, config: PolicyConfig, theta: np.ndarray | None = None):
        self.config = config
        V = config.vocab_size
        self.vocab_size = V
        self.eos = V - 1
        self.bos = V
        self.n_ctx = (V + 1) ** config.k
        self.ctx0 = sum(self.bos * (V + 1) ** j for j in range(config.k))
        self.n_task_params = config.n_tasks * self.n_ctx * V
        n_shared = self.n_ctx * V if config.shared_table else 0
        size = self.n_task_params + n_shared
        if theta is None:
            theta = np.zeros(size)
        elif theta.shape != (size,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({size},)")
        self.theta = theta

    @property
    def task_table(self) -> np.ndarray:
        return self.theta[: self.n_task_params].reshape(self.config.n_tasks, self.n_ctx, self.vocab_size)

    @property
    def shared_table(self) -> np.ndarray | None:
        if not self.config.shared_table:
            return None
        return self.theta[self.n_task_params :].reshape(self.n_ctx, self.vocab_size)

    def copy(self) -> "PolicyTable":
        return PolicyTable(self.config, self.theta.copy())

    def frozen(self) -> "PolicyTable":
        """An independent read-only copy, used as the reference policy."""
        theta = self.theta.copy()
        theta.setflags(write=False)
        return PolicyTable(self.config, theta)

    def next_ctx(self, ctx: np.ndarray, token: np.ndarray) -> np.ndarray:
        return (ctx * (self.vocab_size + 1) + token) % self.n_ctx

    def logits(self, task_ids: np.ndarray, ctx: np.ndarray) -> np.ndarray:
        out = self.task_table[task_ids, ctx]
        if self.config.shared_table:
            out = out + self.shared_table[ctx]
        return out

    def log_probs(self, task_ids: np.ndarray, ctx: np.ndarray) -> np.ndarray:
        lg = self.logits(task_ids, ctx)
        m = lg.max(axis=-1, keepdims=True)
        return lg - (m + np.log(np.exp(lg - m).sum(axis=-1, keepdims=True)))

    def probs(self, task_ids: np.ndarray, ctx: np.ndarray) -> np.ndarray:
        return np.exp(self.log_probs(task_ids, ctx))


def init_policy(config: PolicyConfig | None = None) -> PolicyTable:
    """Zero logits everywhere: the uniform distribution at every state."""
    return PolicyTable(config or PolicyConfig())


@dataclass
class Rollout:
    task_id: int
    tokens: tuple[int, ...]
    logp_old: np.ndarray  # per token, under the sampling policy; forced Eos has 0
    forced_eos: bool = False
    logp_current: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class TokenStates:
    """Flattened decision points of a batch of rollouts."""

    row: np.ndarray  # rollout index
    task: np.ndarray
    ctx: np.ndarray
    token: np.ndarray


def sample_batch(policy: PolicyTable, task_ids: Sequence[int], rng: np.random.Generator) -> list[Rollout]:
    """Sample one completion per entry of ``task_ids``.

    Uniform draws for every slot are taken up front, so the stream advances by
    the same amount regardless of when sequences end.  The final slot is a
    forced Eos carrying log-probability 0.
    """
    task_ids = np.asarray(task_ids, dtype=np.int64)
    n, L = len(task_ids), policy.config.max_len
    u = rng.random((n, L - 1))
    tokens = np.full((n, L), -1, dtype=np.int64)
    logp = np.zeros((n, L))
    ctx = np.full(n, policy.ctx0, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    for t in range(L - 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        lp = policy.log_probs(task_ids[idx], ctx[idx])
        cdf = np.cumsum(np.exp(lp), axis=1)
        tok = (cdf < u[idx, t, None] * cdf[:, -1:]).sum(axis=1)
        np.minimum(tok, policy.vocab_size - 1, out=tok)
        tokens[idx, t] = tok
        logp[idx, t] = lp[np.arange(idx.size), tok]
        alive[idx[tok == policy.eos]] = False
        ctx[idx] = policy.next_ctx(ctx[idx], tok)
    forced = alive.copy()
    tokens[forced, L - 1] = policy.eos
    out = []
    for i in range(n):
        length = int((tokens[i] >= 0).sum())
        out.append(Rollout(int(task_ids[i]), tuple(int(x) for x in tokens[i, :length]), logp[i, :length].copy(), bool(forced[i])))
    return out


def sample(policy: PolicyTable, task_id: int, rng: np.random.Generator) -> Rollout:
    return sample_batch(policy, [task_id], rng)[0]


def greedy(policy: PolicyTable, task_id: int) -> tuple[int, ...]:
    ctx = np.array([policy.ctx0])
    task = np.array([task_id])
    out: list[int] = []
    for _ in range(policy.config.max_len - 1):
        tok = int(np.argmax(policy.logits(task, ctx)[0]))
        out.append(tok)
        if tok == policy.eos:
            return tuple(out)
        ctx = policy.next_ctx(ctx, np.array([tok]))
    return tuple(out) + (policy.eos,)


def _decisions(policy: PolicyTable, tokens: Sequence[int]) -> int:
    # The slot at max_len - 1 is a forced Eos, not a policy decision.
    return min(len(tokens), policy.config.max_len - 1)


def token_states(policy: PolicyTable, seqs: Sequence[Sequence[int]], task_ids: Sequence[int]) -> TokenStates:
    rows, tasks, ctxs, toks = [], [], [], []
    V1, n_ctx = policy.vocab_size + 1, policy.n_ctx
    for r, (seq, task) in enumerate(zip(seqs, task_ids)):
        ctx = policy.ctx0
        for t in range(_decisions(policy, seq)):
            rows.append(r)
            tasks.append(task)
            ctxs.append(ctx)
            toks.append(seq[t])
            ctx = (ctx * V1 + seq[t]) % n_ctx
    as_arr = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    return TokenStates(as_arr(rows), as_arr(tasks), as_arr(ctxs), as_arr(toks))


def rollout_states(policy: PolicyTable, rollouts: Sequence[Rollout]) -> TokenStates:
    return token_states(policy, [r.tokens for r in rollouts], [r.task_id for r in rollouts])


def token_logps(policy: PolicyTable, states: TokenStates) -> np.ndarray:
    lp = policy.log_probs(states.task, states.ctx)
    return lp[np.arange(states.token.size), states.token]


def score_gradient(policy: PolicyTable, states: TokenStates, coef: np.ndarray) -> np.ndarray:
    """``sum_t coef[t] * grad log pi(token_t | state_t)`` as a flat vector."""
    V = policy.vocab_size
    grad = np.zeros_like(policy.theta)
    if states.token.size == 0:
        return grad
    pi = policy.probs(states.task, states.ctx)
    contrib = -coef[:, None] * pi
    contrib[np.arange(coef.size), states.token] += coef
    base = (states.task * policy.n_ctx + states.ctx) * V
    np.add.at(grad, base[:, None] + np.arange(V), contrib)
    if policy.config.shared_table:
        np.add.at(grad, policy.n_task_params + states.ctx[:, None] * V + np.arange(V), contrib)
    return grad


def sequence_logprob(policy: PolicyTable, seq: Sequence[int], task_id: int) -> float:
    st = token_states(policy, [seq], [task_id])
    return float(token_logps(policy, st).sum())


def logprob_and_grad(policy: PolicyTable, seq: Sequence[int], task_id: int) -> tuple[float, np.ndarray]:
    st = token_states(policy, [seq], [task_id])
    logp = float(token_logps(policy, st).sum())
    return logp, score_gradient(policy, st, np.ones(st.token.size))


def kl_rows(p_logp: np.ndarray, q_logp: np.ndarray) -> np.ndarray:
    return (np.exp(p_logp) * (p_logp - q_logp)).sum(axis=-1)


def kl_to_reference(policy: PolicyTable, reference: PolicyTable, rollouts: Sequence[Rollout]) -> float:
    """Mean over visited decision states of the exact KL(policy || reference)."""
    if policy.theta.shape != reference.theta.shape:
        raise ValueError("policy and reference differ in shape")
    st = rollout_states(policy, rollouts)
    if st.token.size == 0:
        return 0.0
    kl = kl_rows(policy.log_probs(st.task, st.ctx), reference.log_probs(st.task, st.ctx))
    return float(max(kl.mean(), 0.0))


# --- checkpoints ------------------------------------------------------------

CHECKPOINT_MAGIC = "shortcutlab-policy/1"


def vocab_names(vocab_size: int) -> list[str]:
    if vocab_size == VOCAB_SIZE:
        return [t.name for t in Tok]
    return [f"t{i}" for i in range(vocab_size - 1)] + ["EOS"]


def save_checkpoint(policy: PolicyTable, path: str | Path, *, seed: int | None = None) -> None:
    """One JSON header line, then theta as little-endian float64."""
    cfg = policy.config
    header = {
        "format": CHECKPOINT_MAGIC,
        "config": asdict(cfg),
        "shape": {
            "task_table": [cfg.n_tasks, policy.n_ctx, cfg.vocab_size],
            "shared_table": [policy.n_ctx, cfg.vocab_size] if cfg.shared_table else None,
        },
        "k": cfg.k,
        "vocab": vocab_names(cfg.vocab_size),
        "seed": seed,
        "dtype": "<f8",
        "count": int(policy.theta.size),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(policy.theta.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[PolicyTable, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a policy checkpoint")
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if theta.size != header["count"]:
        raise ValueError(f"{path}: truncated checkpoint")
    return PolicyTable(PolicyConfig(**header["config"]), theta), header
