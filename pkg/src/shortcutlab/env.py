"""Single-digit addition tasks with a known answer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .formats import extract_boxed

N_TASKS = 100


@dataclass(frozen=True)
class ToyTask:
    task_id: int
    a: int
    b: int
    op: str = "add"

    @property
    def answer(self) -> str:
        return str(self.a + self.b)

    @classmethod
    def from_id(cls, task_id: int) -> "ToyTask":
        if not 0 <= task_id < N_TASKS:
            raise ValueError(f"task_id {task_id} out of range")
        return cls(task_id, task_id // 10, task_id % 10)

    @classmethod
    def from_operands(cls, a: int, b: int) -> "ToyTask":
        if not (0 <= a <= 9 and 0 <= b <= 9):
            raise ValueError("operands must be single digits")
        return cls(10 * a + b, a, b)


ALL_TASKS = tuple(ToyTask.from_id(i) for i in range(N_TASKS))


def sample_task(rng: np.random.Generator) -> ToyTask:
    return ALL_TASKS[int(rng.integers(N_TASKS))]


def sample_tasks(rng: np.random.Generator, n: int) -> list[ToyTask]:
    return [ALL_TASKS[i] for i in rng.integers(N_TASKS, size=n)]


def is_equivalent(truth: str, seq: Sequence[int]) -> bool:
    boxed = extract_boxed(seq)
    return boxed is not None and int(boxed) == int(truth)
