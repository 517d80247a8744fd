from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from pydantic import Field

from .._encoder import EncoderLayout, FrameStack, encode, push_frame
from .._env import IntersectionEnv
from .._exceptions import NonFiniteLossError
from .._types import SECONDS_PER_DAY, Action, ConfigModel
from ._network import LossKind, NetworkParams, NetworkSpec, forward, gradients, init_params
from ._policy import EpsilonSchedule, Stage, epsilon_at, q_target, select_action, stage_at
from ._replay import ReplayBuffer, Transition

logger = logging.getLogger(__name__)


class TrainConfig(ConfigModel):
    gamma: float = Field(default=0.99, ge=0, lt=1)
    learning_rate: float = Field(default=1e-4, ge=0)
    batch_size: int = Field(default=32, ge=1)
    train_every_s: int = Field(default=4, ge=1)
    warmup: int = Field(default=5000, ge=1)
    replay_capacity: int = Field(default=100_000, ge=1)
    loss: LossKind = LossKind.HUBER
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    max_random_lockout_s: int = Field(default=15, ge=0)


# --- Optimiser ---


@dataclass(frozen=True, slots=True)
class AdamState:
    m: NetworkParams
    v: NetworkParams
    step: int = 0

    @classmethod
    def zeros(cls, params: NetworkParams) -> AdamState:
        return cls(params.zeros_like(), params.zeros_like())


def adam_update(
    params: NetworkParams, grads: NetworkParams, state: AdamState, cfg: TrainConfig
) -> tuple[NetworkParams, AdamState]:
    step = state.step + 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = state.m.zip_map(grads, lambda m, g: b1 * m + (1 - b1) * g)
    v = state.v.zip_map(grads, lambda v, g: b2 * v + (1 - b2) * g * g)
    m_hat = m.map(lambda a: a / (1 - b1**step))
    v_hat = v.map(lambda a: a / (1 - b2**step))
    direction = m_hat.zip_map(v_hat, lambda mh, vh: mh / (np.sqrt(vh) + cfg.adam_eps))
    updated = params.zip_map(direction, lambda p, d: p - cfg.learning_rate * d)
    return updated, AdamState(m, v, step)


# --- Training ---


@dataclass(frozen=True, slots=True, kw_only=True)
class TrainStepResult:
    params: NetworkParams
    adam: AdamState
    loss: float | None


def train_step(
    spec: NetworkSpec,
    params: NetworkParams,
    adam: AdamState,
    buffer: ReplayBuffer,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> TrainStepResult:
    """One Adam step on a uniform minibatch; a no-op until the buffer holds ``cfg.warmup`` transitions."""
    if len(buffer) < cfg.warmup:
        return TrainStepResult(params=params, adam=adam, loss=None)
    batch = buffer.sample(rng, cfg.batch_size)
    states = np.stack([t.state.as_tensor() for t in batch])
    next_states = np.stack([t.next_state.as_tensor() for t in batch])
    actions = np.array([int(t.action) for t in batch], dtype=np.intp)
    next_q = forward(spec, params, next_states)
    targets = np.array([q_target(t.reward, cfg.gamma, next_q[i], t.next_mask) for i, t in enumerate(batch)])
    loss, grads = gradients(spec, params, states, actions, targets, cfg.loss)
    updated, adam = adam_update(params, grads, adam, cfg)
    if not updated.is_finite():
        raise NonFiniteLossError(loss=loss, step=adam.step, detail="parameters became non-finite after the update")
    return TrainStepResult(params=updated, adam=adam, loss=loss)


@dataclass(frozen=True, slots=True, kw_only=True)
class DaySummary:
    day: int
    stage: Stage
    epsilon: float
    vehicles: int
    unserved: int
    total_travel_time_s: int
    total_delay_s: int
    mean_loss: float | None
    mean_reward: float

    @property
    def mean_delay_s(self) -> float:
        charged = self.vehicles + self.unserved
        return self.total_delay_s / charged if charged else 0.0


@dataclass(frozen=True, slots=True, kw_only=True)
class StepRecord:
    global_t: int
    day: int
    stage: Stage
    epsilon: float
    loss: float
    reward: float


@dataclass(frozen=True, slots=True, kw_only=True)
class TrainingResult:
    params: NetworkParams
    adam: AdamState
    days: tuple[DaySummary, ...]
    gradient_steps: int


def run_training(
    env: IntersectionEnv,
    *,
    network: NetworkSpec,
    layout: EncoderLayout,
    schedule: EpsilonSchedule,
    cfg: TrainConfig,
    days: int,
    seed: int,
    params: NetworkParams | None = None,
    on_step: Callable[[StepRecord], None] | None = None,
) -> TrainingResult:
    """Run the agent through ``days`` consecutive simulated days, learning online.

    Day boundaries are not terminal; the schedule clock counts seconds since training began. A day's travel time
    and delay count every vehicle-second spent in the system and in queue during that day, so vehicles carried
    over a midnight are charged to both days for their share.
    """
    if days < 1:
        raise ValueError("training needs at least one day")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    params = init_params(network, rng) if params is None else params
    adam = AdamState.zeros(params)
    buffer = ReplayBuffer(cfg.replay_capacity)
    start = env.clock.t

    stack = FrameStack.bootstrap(encode(env.sim.queue_lengths(), env.signal, env.clock, layout))
    summaries: list[DaySummary] = []
    gradient_steps = 0
    for day in range(days):
        vehicles = travel = delay = 0
        losses: list[float] = []
        reward_sum = 0.0
        for _ in range(SECONDS_PER_DAY):
            elapsed = env.clock.t - start
            epsilon = epsilon_at(elapsed, schedule)
            stage = stage_at(elapsed, schedule)
            mask = env.mask()
            if sum(mask) > 1:
                q = forward(network, params, stack.as_tensor()) if epsilon < 1.0 else np.zeros(len(mask))
                action, lockout = select_action(q, mask, epsilon, rng, stage, cfg.max_random_lockout_s)
            else:
                action, lockout = Action.DO_NOTHING, 0
            step = env.step(action, lockout)

            next_stack = push_frame(stack, encode(env.sim.queue_lengths(), env.signal, env.clock, layout))
            buffer.append(
                Transition(state=stack, action=action, reward=step.reward, next_state=next_stack, next_mask=env.mask())
            )
            stack = next_stack
            reward_sum += step.reward
            vehicles += len(step.outcome.departures)
            queued = env.sim.queued_total()
            travel += queued + env.sim.in_transit_count()
            delay += queued

            if elapsed % cfg.train_every_s == 0:
                result = train_step(network, params, adam, buffer, cfg, rng)
                if result.loss is not None:
                    params, adam = result.params, result.adam
                    losses.append(result.loss)
                    gradient_steps += 1
                    if on_step is not None:
                        on_step(
                            StepRecord(
                                global_t=elapsed,
                                day=day,
                                stage=stage,
                                epsilon=epsilon,
                                loss=result.loss,
                                reward=step.reward,
                            )
                        )

        elapsed = env.clock.t - start - 1
        summary = DaySummary(
            day=day,
            stage=stage_at(elapsed, schedule),
            epsilon=epsilon_at(elapsed, schedule),
            vehicles=vehicles,
            unserved=env.sim.queued_total(),
            total_travel_time_s=travel,
            total_delay_s=delay,
            mean_loss=float(np.mean(losses)) if losses else None,
            mean_reward=reward_sum / SECONDS_PER_DAY,
        )
        summaries.append(summary)
        logger.info(
            "day %d/%d stage=%s eps=%.4f vehicles=%d unserved=%d ttt=%ds mean_delay=%.2fs mean_loss=%s",
            day + 1,
            days,
            summary.stage.value,
            summary.epsilon,
            vehicles,
            summary.unserved,
            travel,
            summary.mean_delay_s,
            "n/a" if summary.mean_loss is None else f"{summary.mean_loss:.5f}",
        )
    return TrainingResult(params=params, adam=adam, days=tuple(summaries), gradient_steps=gradient_steps)
