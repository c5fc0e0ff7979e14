"""Train on the composite reward and watch the policy drop the think block.

The composite scheme pays the same for an answer-only completion as for a
full think/answer completion, so the cheaper answer-only path wins.

Run:  python3 demos/03_cognitive_shortcut.py [seed]
"""

import sys

from shortcutlab.harness import ANSWER_ONLY, default_config, run_experiment


def progress(step, groups):
    if step % 200 == 0:
        print(f"  step {step:4d}")


if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    cfg = default_config("CompositeChoice", seed=seed)
    cfg.out_dir = f"runs/demo_composite_s{seed}"
    res = run_experiment(cfg, on_update=progress)

    rates = [r["match_rates"][ANSWER_ONLY] for r in res.records]
    for step in (0, 100, 250, 500, 999):
        print(f"step {step:4d}: answer-only share {rates[step]:.2f}, "
              f"mean length {res.records[step]['mean_completion_length']:.1f}")
    print(f"final answer-only share (last 50 steps): {res.summary['final_match_rates'][ANSWER_ONLY]:.3f}")
    print(f"log: {res.log_path}")
