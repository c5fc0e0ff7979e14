"""Mutually exclusive formats: the policy settles on a single one.

Run:  python3 demos/05_conflict.py [seed]
"""

import sys

from shortcutlab.harness import default_config, run_experiment

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    cfg = default_config("Conflict", seed=seed)
    cfg.out_dir = f"runs/demo_conflict_s{seed}"
    res = run_experiment(cfg)
    for step in (0, 50, 100, 200, 999):
        rates = res.records[step]["match_rates"]
        print(f"step {step:4d}: " + "  ".join(f"{f}={rates[f]:.2f}" for f in ("F1Excl", "F2Excl", "F3Excl")))
    print("final channel means:", {k: round(v, 3) for k, v in res.summary["final_format_rewards"].items()})
