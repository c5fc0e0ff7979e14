"""Score a few completions under every reward scheme.

Run:  python3 demos/02_reward_scoring.py
"""

from shortcutlab.env import ToyTask
from shortcutlab.formats import parse
from shortcutlab.rewards import RewardScheme, SchemeKind, total_reward

task = ToyTask.from_id(17)
truth = task.answer
COMPLETIONS = {
    "full, correct": f"<think> _ </think> <answer> \\boxed{{ {' '.join(truth)} }} </answer>",
    "answer only": f"<answer> \\boxed{{ {' '.join(truth)} }} </answer>",
    "bare box, wrong": "\\boxed{ 0 }",
    "no format": "_ _ _",
}

if __name__ == "__main__":
    print(f"task {task.task_id}: answer {truth}\n")
    for kind in SchemeKind:
        scheme = RewardScheme.default(kind)
        print(f"[{kind.value}] correctness weight {scheme.correctness_weight}")
        for name, text in COMPLETIONS.items():
            bd = total_reward(parse(text), truth, scheme)
            channels = ", ".join(f"{f.value}={v:+.0f}" for f, v in bd.per_format.items())
            print(f"  {name:<16} total {bd.total:+6.1f}   {channels}")
        print()
