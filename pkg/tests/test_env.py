import numpy as np
import pytest

from shortcutlab.env import ALL_TASKS, N_TASKS, ToyTask, is_equivalent, sample_task, sample_tasks
from shortcutlab.formats import parse


def test_task_table():
    assert len(ALL_TASKS) == N_TASKS == 100
    assert len({(t.a, t.b) for t in ALL_TASKS}) == 100
    t = ToyTask.from_operands(9, 8)
    assert t.answer == "17" and ToyTask.from_id(t.task_id) == t
    with pytest.raises(ValueError):
        ToyTask.from_id(100)
    with pytest.raises(ValueError):
        ToyTask.from_operands(10, 0)


def test_sampling_is_uniform():
    rng = np.random.default_rng(0)
    n = 200_000
    counts = np.bincount([t.task_id for t in sample_tasks(rng, n)], minlength=100)
    p = 1 / 100
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) < 5 * sigma)


def test_sampling_is_deterministic():
    a = [sample_task(np.random.default_rng(4)).task_id for _ in range(3)]
    assert len(set(a)) == 1
    assert sample_tasks(np.random.default_rng(1), 20) == sample_tasks(np.random.default_rng(1), 20)


def test_is_equivalent():
    assert is_equivalent("7", parse("\\boxed{ 7 }"))
    assert is_equivalent("7", parse("\\boxed{ 0 7 }"))
    assert not is_equivalent("7", parse("\\boxed{ 8 }"))
    assert not is_equivalent("7", parse("7"))
