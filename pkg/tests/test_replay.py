from __future__ import annotations

import numpy as np
import pytest

from signal_dqn import Action, FrameStack, ReplayBuffer, Transition

EMPTY = FrameStack.bootstrap(np.zeros((24, 24), dtype=np.bool_))
ALL = (True, True, True, True, True)


def _transition(reward: float) -> Transition:
    return Transition(state=EMPTY, action=Action.DO_NOTHING, reward=reward, next_state=EMPTY, next_mask=ALL)


class TestReplayBuffer:
    def test_fifo_eviction(self) -> None:
        buffer = ReplayBuffer(capacity=5)
        for i in range(8):
            buffer.append(_transition(i))
        assert len(buffer) == 5
        assert [t.reward for t in buffer] == [3, 4, 5, 6, 7]

    def test_sample_is_seeded(self) -> None:
        buffer = ReplayBuffer(capacity=100)
        for i in range(100):
            buffer.append(_transition(i))
        a = [t.reward for t in buffer.sample(np.random.default_rng(9), 32)]
        b = [t.reward for t in buffer.sample(np.random.default_rng(9), 32)]
        assert a == b
        assert len(set(a)) == 32

    def test_small_buffer_samples_with_replacement(self) -> None:
        buffer = ReplayBuffer(capacity=10)
        buffer.append(_transition(1.0))
        assert [t.reward for t in buffer.sample(np.random.default_rng(0), 4)] == [1.0] * 4

    def test_sampling_is_uniform(self) -> None:
        buffer = ReplayBuffer(capacity=10)
        for i in range(10):
            buffer.append(_transition(i))
        rng = np.random.default_rng(3)
        counts = np.bincount([int(buffer.sample(rng, 1)[0].reward) for _ in range(10_000)], minlength=10)
        assert np.abs(counts - 1000).max() < 150

    def test_empty(self) -> None:
        with pytest.raises(ValueError, match="empty replay buffer"):
            ReplayBuffer(capacity=3).sample(np.random.default_rng(0), 1)

    def test_capacity_must_be_positive(self) -> None:
        with pytest.raises(ValueError):
            ReplayBuffer(capacity=0)
