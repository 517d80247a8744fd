"""Epsilon-greedy action selection with the observe / explore / train schedule."""

from __future__ import annotations

from collections.abc import Sequence
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from pydantic import Field, model_validator

from .._types import Action, ConfigModel


class Stage(str, Enum):
    OBSERVE = "observe"
    EXPLORE = "explore"
    TRAIN = "train"


class EpsilonSchedule(ConfigModel):
    initial: float = Field(default=1.0, ge=0, le=1)
    final: float = Field(default=0.005, ge=0, le=1)
    observe_end_s: int = Field(default=129600, ge=0)
    explore_end_s: int = Field(default=259200, ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> EpsilonSchedule:
        if self.final > self.initial:
            raise ValueError("final epsilon must not exceed the initial epsilon")
        if self.explore_end_s < self.observe_end_s:
            raise ValueError("exploration must end after observation")
        return self

    def scaled(self, factor: float) -> EpsilonSchedule:
        return self.model_copy(
            update={
                "observe_end_s": round(self.observe_end_s * factor),
                "explore_end_s": round(self.explore_end_s * factor),
            }
        )


def stage_at(t: int, sched: EpsilonSchedule) -> Stage:
    if t < sched.observe_end_s:
        return Stage.OBSERVE
    if t < sched.explore_end_s:
        return Stage.EXPLORE
    return Stage.TRAIN


def epsilon_at(t: float, sched: EpsilonSchedule) -> float:
    if t < sched.observe_end_s:
        return sched.initial
    if t >= sched.explore_end_s:
        return sched.final
    fraction = (t - sched.observe_end_s) / (sched.explore_end_s - sched.observe_end_s)
    return sched.initial + fraction * (sched.final - sched.initial)


def masked_argmax(q: Sequence[float] | NDArray[np.float64], mask: Sequence[bool]) -> Action:
    """Best valid action; the lowest index wins ties."""
    best: int | None = None
    for i, allowed in enumerate(mask):
        if allowed and (best is None or q[i] > q[best]):
            best = i
    if best is None:
        raise ValueError("action mask has no valid action")
    return Action(best)


def q_target(r: float, gamma: float, next_q: Sequence[float] | NDArray[np.float64], next_mask: Sequence[bool]) -> float:
    """``r + gamma * max Q(s', a')`` over the actions valid in ``s'``; the task never terminates."""
    return r + gamma * max(float(q) for q, allowed in zip(next_q, next_mask) if allowed)


def select_action(
    q: Sequence[float] | NDArray[np.float64],
    mask: Sequence[bool],
    epsilon: float,
    rng: np.random.Generator,
    stage: Stage,
    max_lockout_s: int = 15,
) -> tuple[Action, int]:
    """Pick an action and the random do-nothing lockout it requests (0 unless a random DoNothing while learning)."""
    if rng.random() >= epsilon:
        return masked_argmax(q, mask), 0
    valid = [i for i, allowed in enumerate(mask) if allowed]
    action = Action(valid[int(rng.integers(len(valid)))])
    if action is Action.DO_NOTHING and stage is not Stage.TRAIN:
        return action, int(rng.integers(0, max_lockout_s + 1))
    return action, 0
