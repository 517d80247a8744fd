"""Baseline controllers and the adapter that drives the signal from a trained Q-network.

Every controller reads an :class:`Observation` once per second and answers with one :class:`Action`. Actions are not
filtered here; one the rule checker rejects raises :class:`RuleViolationError` when the environment applies it.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from typing import Protocol

import numpy as np
from pydantic import Field, field_validator, model_validator

from ._dqn import NetworkParams, NetworkSpec, forward, masked_argmax
from ._encoder import EncoderLayout, FrameStack, encode, push_frame
from ._env import Observation
from ._exceptions import ConfigurationError, OversaturatedError
from ._signal import ActionMask, RingBarrierPlan, RingBarrierState
from ._sim import DynamicsConfig, SimClock, VolumeProfile
from ._types import (
    MAJOR_APPROACHES,
    MINOR_APPROACHES,
    SECONDS_PER_DAY,
    Action,
    Approach,
    ConfigModel,
    Interval,
    parse_approach,
)

logger = logging.getLogger(__name__)

# --- Timing plans ---


class FixedTimePlan(ConfigModel):
    id: str
    cycle_s: int = Field(gt=0)
    splits: dict[int, int] = Field(description="ring-1 phase id -> split (green plus clearance), seconds")

    @model_validator(mode="after")
    def _check_splits(self) -> FixedTimePlan:
        total = sum(self.splits.values())
        if total != self.cycle_s:
            raise ValueError(f"plan {self.id!r}: splits sum to {total} s, cycle is {self.cycle_s} s")
        return self


class PlanWindow(ConfigModel):
    start_s: int = Field(ge=0, lt=SECONDS_PER_DAY)
    end_s: int = Field(gt=0, le=SECONDS_PER_DAY)
    plan: str


def _hours(*rows: tuple[int, int, str]) -> tuple[PlanWindow, ...]:
    return tuple(PlanWindow(start_s=a * 3600, end_s=b * 3600, plan=name) for a, b, name in rows)


def _default_windows() -> tuple[PlanWindow, ...]:
    return _hours(
        (0, 6, "night"),
        (6, 10, "am-peak"),
        (10, 15, "midday"),
        (15, 19, "pm-peak"),
        (19, 23, "evening"),
        (23, 24, "night"),
    )


class PlanConfig(ConfigModel):
    """Time-of-day plan windows; plans not given explicitly are generated with Webster's method."""

    windows: tuple[PlanWindow, ...] = Field(default_factory=_default_windows)
    plans: dict[str, FixedTimePlan] = Field(default_factory=dict)
    saturation_flow_vph: float = Field(default=1800.0, gt=0)
    min_cycle_s: int = Field(default=40, gt=0)
    max_cycle_s: int = Field(default=120, gt=0)

    @model_validator(mode="after")
    def _check_windows(self) -> PlanConfig:
        cursor = 0
        for window in sorted(self.windows, key=lambda w: w.start_s):
            if window.start_s != cursor:
                raise ValueError(f"plan windows leave [{cursor}, {window.start_s}) uncovered")
            cursor = window.end_s
        if cursor != SECONDS_PER_DAY:
            raise ValueError(f"plan windows end at {cursor}, expected {SECONDS_PER_DAY}")
        if self.max_cycle_s < self.min_cycle_s:
            raise ValueError("max_cycle_s must not be below min_cycle_s")
        return self


class PlanSchedule:
    """Resolved plans by time of day."""

    def __init__(self, plans: Mapping[str, FixedTimePlan], windows: Sequence[PlanWindow]) -> None:
        missing = {w.plan for w in windows} - set(plans)
        if missing:
            raise ConfigurationError(f"plan windows reference undefined plans {sorted(missing)}")
        self.plans = dict(plans)
        self.windows = tuple(sorted(windows, key=lambda w: w.start_s))

    def plan_at(self, second_of_day: int) -> FixedTimePlan:
        for window in self.windows:
            if window.start_s <= second_of_day < window.end_s:
                return self.plans[window.plan]
        raise ConfigurationError(f"no timing plan covers second {second_of_day}")


def _allocate(total: int, weights: Sequence[float], floor: int) -> list[int]:
    """Integer shares of ``total`` proportional to ``weights``, each at least ``floor``, summing to ``total``."""
    n = len(weights)
    if n * floor > total:
        raise ConfigurationError(f"cycle {total} s cannot give {n} phases {floor} s each")
    if sum(weights) <= 0:
        weights = [1.0] * n
    pinned: set[int] = set()
    while True:
        free = [i for i in range(n) if i not in pinned]
        budget = total - floor * len(pinned)
        weight = sum(weights[i] for i in free)
        shares = {i: budget * weights[i] / weight if weight > 0 else budget / len(free) for i in free}
        low = {i for i, share in shares.items() if share < floor}
        if not low:
            break
        pinned |= low
    raw = [float(floor) if i in pinned else shares[i] for i in range(n)]
    out = [int(np.floor(r)) for r in raw]
    # largest remainder
    for i in sorted(range(n), key=lambda i: (-(raw[i] - out[i]), i))[: total - sum(out)]:
        out[i] += 1
    return out


def webster_plan(
    critical_volumes: Mapping[int, float],
    saturation_flow: float,
    lost_time_s: float,
    *,
    plan_id: str = "webster",
    min_cycle_s: int = 40,
    max_cycle_s: int = 120,
    min_split_s: int = 0,
) -> FixedTimePlan:
    """Cycle ``(1.5 L + 5) / (1 - Y)`` clamped and rounded to 5 s, green shared in proportion to v/s."""
    ratios = {pid: v / saturation_flow for pid, v in critical_volumes.items()}
    y = sum(ratios.values())
    if y >= 1:
        raise OversaturatedError(flow_ratio=y)
    cycle = (1.5 * lost_time_s + 5) / (1 - y)
    cycle_s = int(5 * np.floor(min(max(cycle, min_cycle_s), max_cycle_s) / 5 + 0.5))
    phases = list(ratios)
    lost_each = lost_time_s / len(phases)
    effective = cycle_s - lost_time_s
    weights = [lost_each + effective * (ratios[p] / y if y > 0 else 1 / len(phases)) for p in phases]
    splits = _allocate(cycle_s, weights, min_split_s)
    logger.debug("webster %s: Y=%.3f cycle=%d s splits=%s", plan_id, y, cycle_s, splits)
    return FixedTimePlan(id=plan_id, cycle_s=cycle_s, splits=dict(zip(phases, splits)))


def shortest_split_s(plan: RingBarrierPlan, phase_id: int) -> int:
    """Shortest split the machine can run exactly: min green, the decision second and the clearance."""
    phase = plan.phase(phase_id)
    return phase.min_green_s + phase.clearance_s + 1


def timing_plans_from_profile(
    profile: VolumeProfile, signal_plan: RingBarrierPlan, config: PlanConfig, dynamics: DynamicsConfig
) -> PlanSchedule:
    """Webster plan per window, sized on the window's highest-volume hour."""
    hourly = profile.volumes_per_second().reshape(24, 3600, len(Approach)).mean(axis=1)
    phases = signal_plan.ring1
    critical = np.array(
        [[max(hourly[h, a] for a in signal_plan.approaches_of(pid)) for pid in phases] for h in range(24)]
    )
    lost = sum(dynamics.startup_lost_s + signal_plan.phase(pid).clearance_s for pid in phases)
    floor = max(shortest_split_s(signal_plan, pid) for pid in phases)

    plans = dict(config.plans)
    for name in dict.fromkeys(w.plan for w in config.windows):
        if name in plans:
            continue
        hours = sorted(
            {h for w in config.windows if w.plan == name for h in range(w.start_s // 3600, -(-w.end_s // 3600))}
        )
        peak = max(hours, key=lambda h: (critical[h].sum(), -h))
        plans[name] = webster_plan(
            dict(zip(phases, critical[peak].tolist())),
            config.saturation_flow_vph,
            lost,
            plan_id=name,
            min_cycle_s=config.min_cycle_s,
            max_cycle_s=config.max_cycle_s,
            min_split_s=floor,
        )
    for plan in plans.values():
        if set(plan.splits) != set(phases):
            raise ConfigurationError(
                f"plan {plan.id!r} has splits for {sorted(plan.splits)}, ring 1 runs {list(phases)}"
            )
        for pid, split in plan.splits.items():
            shortest = shortest_split_s(signal_plan, pid)
            if split < shortest:
                raise ConfigurationError(f"plan {plan.id!r}: split {split} s for phase {pid} is below {shortest} s")
    return PlanSchedule(plans, config.windows)


# --- Step functions ---


def _advance_age(split_s: int, plan: RingBarrierPlan, phase_id: int) -> int:
    return split_s - plan.phase(phase_id).clearance_s - 1


def fixed_time_step(
    schedule: PlanSchedule, clock: SimClock, signal_state: RingBarrierState, signal_plan: RingBarrierPlan
) -> Action:
    ring = signal_state.ring1
    if ring.interval is not Interval.GREEN:
        return Action.DO_NOTHING
    plan = schedule.plan_at(clock.second_of_day)
    if ring.time_in_interval_s >= _advance_age(plan.splits[ring.phase], signal_plan, ring.phase):
        return Action.ADVANCE_BOTH
    return Action.DO_NOTHING


class ActuatedConfig(ConfigModel):
    gap_s: int = Field(default=3, gt=0, description="passage time")
    max_green_s: int = Field(default=30, gt=0, description="minor-street maximum green")
    detector_approaches: tuple[Approach, ...] = MINOR_APPROACHES
    free_mode_start_s: int = Field(default=23 * 3600, ge=0, lt=SECONDS_PER_DAY)
    free_mode_end_s: int = Field(default=6 * 3600, ge=0, lt=SECONDS_PER_DAY)

    @field_validator("detector_approaches", mode="before")
    @classmethod
    def _approaches_by_name(cls, value: object) -> object:
        if isinstance(value, (list, tuple)):
            return [parse_approach(v) for v in value]  # pyright: ignore[reportUnknownVariableType]
        return value

    def in_free_mode(self, second_of_day: int) -> bool:
        start, end = self.free_mode_start_s, self.free_mode_end_s
        if start <= end:
            return start <= second_of_day < end
        return second_of_day >= start or second_of_day < end


def semi_actuated_step(
    cfg: ActuatedConfig,
    detector_occupancy: Sequence[bool],
    clock: SimClock,
    signal_state: RingBarrierState,
    signal_plan: RingBarrierPlan,
    seconds_since_actuation: int,
    active_plan: FixedTimePlan | None = None,
) -> Action:
    """Rest on the major street; serve the minor street on a call, ending it on gap-out or max-out.

    Outside free mode ``active_plan`` sets the major green floor and the minor green cap.
    """
    ring = signal_state.ring1
    if ring.interval is not Interval.GREEN:
        return Action.DO_NOTHING
    phase = signal_plan.phase(ring.phase)
    age = ring.time_in_interval_s
    planned = None
    if active_plan is not None and not cfg.in_free_mode(clock.second_of_day):
        planned = _advance_age(active_plan.splits[ring.phase], signal_plan, ring.phase)

    if phase.served_approaches <= frozenset(MAJOR_APPROACHES):
        call = any(detector_occupancy[a] for a in cfg.detector_approaches)
        hold = phase.min_green_s if planned is None else max(phase.min_green_s, planned)
        return Action.ADVANCE_BOTH if call and age >= hold else Action.DO_NOTHING

    if age < phase.min_green_s:
        return Action.DO_NOTHING
    cap = cfg.max_green_s if planned is None else min(cfg.max_green_s, max(phase.min_green_s, planned))
    if seconds_since_actuation > cfg.gap_s or age >= cap:
        return Action.ADVANCE_BOTH
    return Action.DO_NOTHING


def drl_policy_step(spec: NetworkSpec, params: NetworkParams, frame_stack: FrameStack, mask: ActionMask) -> Action:
    """Greedy masked argmax over the network's Q-values."""
    return masked_argmax(forward(spec, params, frame_stack.as_tensor()), mask)


# --- Controllers ---


class Controller(Protocol):
    name: str

    def reset(self) -> None: ...

    def decide(self, observation: Observation) -> Action: ...


class FixedTimeController:
    name = "fixed-time"

    def __init__(self, schedule: PlanSchedule, signal_plan: RingBarrierPlan) -> None:
        self.schedule = schedule
        self.signal_plan = signal_plan

    def reset(self) -> None:
        pass

    def decide(self, observation: Observation) -> Action:
        return fixed_time_step(self.schedule, observation.clock, observation.signal, self.signal_plan)


class SemiActuatedController:
    name = "semi-actuated"

    def __init__(self, cfg: ActuatedConfig, schedule: PlanSchedule | None, signal_plan: RingBarrierPlan) -> None:
        for pid in signal_plan.ring1:
            if not signal_plan.approaches_of(pid) <= frozenset(MAJOR_APPROACHES):
                if cfg.max_green_s < signal_plan.phase(pid).min_green_s:
                    raise ConfigurationError(
                        f"max green {cfg.max_green_s} s is below phase {pid} min green "
                        f"{signal_plan.phase(pid).min_green_s} s"
                    )
        self.cfg = cfg
        self.schedule = schedule
        self.signal_plan = signal_plan
        self.seconds_since_actuation = 0

    def reset(self) -> None:
        self.seconds_since_actuation = 0

    def decide(self, observation: Observation) -> Action:
        if any(observation.detectors[a] for a in self.cfg.detector_approaches):
            self.seconds_since_actuation = 0
        else:
            self.seconds_since_actuation += 1
        active = self.schedule.plan_at(observation.clock.second_of_day) if self.schedule is not None else None
        return semi_actuated_step(
            self.cfg,
            observation.detectors,
            observation.clock,
            observation.signal,
            self.signal_plan,
            self.seconds_since_actuation,
            active,
        )


class DRLController:
    """Greedy agent; keeps the last four encoded frames between calls."""

    name = "drl"

    def __init__(self, spec: NetworkSpec, params: NetworkParams, layout: EncoderLayout) -> None:
        if spec.input_size != layout.size:
            raise ConfigurationError(
                f"network expects {spec.input_size}x{spec.input_size} states, layout is {layout.size}"
            )
        self.spec = spec
        self.params = params
        self.layout = layout
        self._stack: FrameStack | None = None

    def reset(self) -> None:
        self._stack = None

    def decide(self, observation: Observation) -> Action:
        frame = encode(observation.queues, observation.signal, observation.clock, self.layout)
        self._stack = FrameStack.bootstrap(frame) if self._stack is None else push_frame(self._stack, frame)
        return drl_policy_step(self.spec, self.params, self._stack, observation.mask)
