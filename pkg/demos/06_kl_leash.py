"""Two KL coefficients, same seed: how tightly the reference holds the policy.

Run:  python3 demos/06_kl_leash.py [seed]
"""

import sys

from shortcutlab.harness import default_config, run_pair_kl_study
from shortcutlab.plotting import plot_runs

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    cfg = default_config("KlLeash", seed=seed)
    cfg.out_dir = f"runs/demo_leash_s{seed}"
    study = run_pair_kl_study(cfg)
    print(f"{'arm':<16}{'beta':>6}{'KL':>8}{'reward':>9}{'length':>15}")
    for name, arm in study["comparison"].items():
        length = f"{arm['initial_length']:.1f} -> {arm['final_length']:.1f}"
        print(f"{name:<16}{arm['beta']:>6}{arm['final_kl']:>8.3f}{arm['final_reward']:>9.2f}{length:>15}")
    logs = [r.log_path for r in study["runs"]]
    print("plot:", plot_runs(logs, f"{cfg.out_dir}/leash.svg"))
