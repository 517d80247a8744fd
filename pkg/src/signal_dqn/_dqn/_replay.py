from __future__ import annotations

from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .._encoder import FrameStack
from .._signal import ActionMask
from .._types import Action


@dataclass(frozen=True, slots=True, kw_only=True)
class Transition:
    state: FrameStack
    action: Action
    reward: float
    next_state: FrameStack
    next_mask: ActionMask


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform minibatch sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self._items)

    def append(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        if not self._items:
            raise ValueError("cannot sample from an empty replay buffer")
        replace = len(self._items) < batch_size
        indices: NDArray[np.int64] = rng.choice(len(self._items), size=batch_size, replace=replace)
        return [self._items[int(i)] for i in indices]
