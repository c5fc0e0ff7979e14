"""Format-reward shortcuts in a tabular policy-optimization toy."""

from .env import ALL_TASKS, ToyTask, is_equivalent, sample_task
from .formats import FormatId, Tok, extract_boxed, matches, parse, render
from .harness import Experiment, RunConfig, default_config, load_config, run_experiment, run_pair_kl_study, saturation_step
from .optimizers import Algo, OptimizerConfig
from .policy import PolicyConfig, PolicyTable, init_policy, load_checkpoint, sample, save_checkpoint
from .rewards import RewardScheme, SchemeKind, total_reward
from .verify import verify_exclusivity, verify_nesting

__all__ = [
    "ALL_TASKS",
    "Algo",
    "Experiment",
    "FormatId",
    "OptimizerConfig",
    "PolicyConfig",
    "PolicyTable",
    "RewardScheme",
    "RunConfig",
    "SchemeKind",
    "Tok",
    "ToyTask",
    "default_config",
    "extract_boxed",
    "init_policy",
    "is_equivalent",
    "load_checkpoint",
    "load_config",
    "matches",
    "parse",
    "render",
    "run_experiment",
    "run_pair_kl_study",
    "sample",
    "sample_task",
    "save_checkpoint",
    "saturation_step",
    "total_reward",
    "verify_exclusivity",
    "verify_nesting",
]
