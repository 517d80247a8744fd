from __future__ import annotations

import numpy as np
import pytest

from signal_dqn import (
    Action,
    AdamState,
    Approach,
    EpsilonSchedule,
    FrameStack,
    NetworkSpec,
    NonFiniteLossError,
    ReplayBuffer,
    RingBarrierPlan,
    Stage,
    TrainConfig,
    Transition,
    init_params,
    layout_for,
    push_frame,
    run_training,
    train_step,
)
from signal_dqn._dqn import ConvSpec, DenseSpec, StepRecord, TrainingResult, adam_update

from .conftest import make_env

TINY = NetworkSpec(input_size=6, layers=(ConvSpec(kernel=3, stride=1, out_channels=2), DenseSpec(width=4)))
AGENT_24 = NetworkSpec(input_size=24, layers=(ConvSpec(kernel=4, stride=4, out_channels=4), DenseSpec(width=16)))
ALL = (True, True, True, True, True)


def _stack(seed: int) -> FrameStack:
    rng = np.random.default_rng(seed)
    frames = [rng.random((6, 6)) < 0.5 for _ in range(4)]
    stack = FrameStack.bootstrap(frames[0])
    for frame in frames[1:]:
        stack = push_frame(stack, frame)
    return stack


def _buffer(reward: float, n: int = 1) -> ReplayBuffer:
    buffer = ReplayBuffer(capacity=100)
    for i in range(n):
        buffer.append(
            Transition(
                state=_stack(i), action=Action.ADVANCE_BOTH, reward=reward, next_state=_stack(i + 1), next_mask=ALL
            )
        )
    return buffer


class TestTrainStep:
    def test_below_warmup(self) -> None:
        params = init_params(TINY, np.random.default_rng(0))
        adam = AdamState.zeros(params)
        result = train_step(TINY, params, adam, _buffer(1.0, 3), TrainConfig(warmup=4), np.random.default_rng(0))
        assert result.loss is None
        assert result.params is params
        assert result.adam is adam

    def test_zero_learning_rate(self) -> None:
        params = init_params(TINY, np.random.default_rng(0))
        cfg = TrainConfig(warmup=1, batch_size=2, learning_rate=0)
        result = train_step(TINY, params, AdamState.zeros(params), _buffer(1.0, 3), cfg, np.random.default_rng(0))
        assert result.loss is not None
        assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), result.params.arrays()))
        assert result.adam.step == 1

    def test_overfits_one_transition(self) -> None:
        params = init_params(TINY, np.random.default_rng(1))
        adam = AdamState.zeros(params)
        buffer = _buffer(1.0)
        cfg = TrainConfig(gamma=0, learning_rate=1e-2, batch_size=4, warmup=1)
        rng = np.random.default_rng(1)
        losses: list[float] = []
        for _ in range(500):
            result = train_step(TINY, params, adam, buffer, cfg, rng)
            assert result.loss is not None
            params, adam = result.params, result.adam
            losses.append(result.loss)
        assert losses[0] > 0
        assert losses[-1] < 1e-3 * losses[0]

    def test_non_finite_reward(self) -> None:
        params = init_params(TINY, np.random.default_rng(0))
        with pytest.raises(NonFiniteLossError):
            train_step(
                TINY, params, AdamState.zeros(params), _buffer(np.inf), TrainConfig(warmup=1), np.random.default_rng(0)
            )


def test_adam_first_step_moves_by_learning_rate() -> None:
    params = init_params(TINY, np.random.default_rng(0))
    grads = params.map(lambda a: np.where(np.arange(a.size).reshape(a.shape) % 2 == 0, 0.3, -2.0))
    updated, state = adam_update(params, grads, AdamState.zeros(params), TrainConfig(learning_rate=0.01))
    assert state.step == 1
    for before, after, g in zip(params.arrays(), updated.arrays(), grads.arrays()):
        assert np.allclose(after - before, -0.01 * np.sign(g), rtol=1e-6, atol=0)


def _one_day(
    plan: RingBarrierPlan, cfg: TrainConfig, schedule: EpsilonSchedule, records: list[StepRecord]
) -> TrainingResult:
    env = make_env(plan, {Approach.EASTBOUND: 500, Approach.WESTBOUND: 500, Approach.NORTHBOUND: 150}, seed=3)
    return run_training(
        env,
        network=AGENT_24,
        layout=layout_for(24, plan),
        schedule=schedule,
        cfg=cfg,
        days=1,
        seed=3,
        on_step=records.append,
    )


@pytest.mark.slow
def test_training_day_is_reproducible(plan: RingBarrierPlan) -> None:
    cfg = TrainConfig(warmup=10**6)
    schedule = EpsilonSchedule()
    first = _one_day(plan, cfg, schedule, [])
    second = _one_day(plan, cfg, schedule, [])
    assert first.days == second.days
    assert first.gradient_steps == 0
    assert first.days[0].stage is Stage.OBSERVE
    assert first.days[0].vehicles > 0


@pytest.mark.slow
def test_training_day_runs_every_stage(plan: RingBarrierPlan) -> None:
    cfg = TrainConfig(warmup=1000, batch_size=8, learning_rate=1e-3)
    schedule = EpsilonSchedule(observe_end_s=43200, explore_end_s=64800)
    records: list[StepRecord] = []
    result = _one_day(plan, cfg, schedule, records)
    assert result.gradient_steps == (86396 - 1000) // 4 + 1
    assert len(records) == result.gradient_steps
    assert {r.stage for r in records} == {Stage.OBSERVE, Stage.EXPLORE, Stage.TRAIN}
    assert records[-1].epsilon == 0.005
    assert result.days[0].stage is Stage.TRAIN
    assert result.days[0].mean_loss is not None
    assert result.params.is_finite()
