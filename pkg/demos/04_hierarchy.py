"""Nested format hierarchy under flat and exponential weights.

Runs both schemes for one seed, prints when each channel saturates and draws
the per-format reward curves.

Run:  python3 demos/04_hierarchy.py [seed]
"""

import sys

from shortcutlab.harness import default_config, run_experiment
from shortcutlab.plotting import plot_runs

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    for experiment in ("HierarchyFlat", "ExponentialGambit"):
        cfg = default_config(experiment, seed=seed)
        cfg.out_dir = f"runs/demo_{experiment}_s{seed}"
        res = run_experiment(cfg)
        sat = res.summary["saturation_step"]
        print(f"{experiment}: saturation steps {sat}")
        print(f"  final per-format reward {res.summary['final_format_rewards']}")
        svg = plot_runs([res.log_path], f"{cfg.out_dir}/formats.svg")
        print(f"  plot: {svg}")
