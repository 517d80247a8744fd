from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from ._reward import RewardConfig, compute_reward
from ._signal import (
    ActionMask,
    RingBarrierPlan,
    RingBarrierState,
    apply_action,
    indications,
    served_phases,
    tick_signal,
    valid_actions,
)
from ._sim import (
    ArrivalStream,
    DynamicsConfig,
    IntersectionSim,
    SimClock,
    TickOutcome,
    VolumeOverride,
    VolumeProfile,
    tick_sim,
)
from ._types import Action


@dataclass(frozen=True, slots=True, kw_only=True)
class Observation:
    """What a controller sees at the start of a second: the state displayed during the previous one."""

    clock: SimClock
    signal: RingBarrierState
    queues: tuple[int, ...]
    detectors: tuple[bool, ...]
    mask: ActionMask


@dataclass(frozen=True, slots=True, kw_only=True)
class Step:
    action: Action
    outcome: TickOutcome
    reward: float
    signal: RingBarrierState


class IntersectionEnv:
    """Signal machine, simulator and reward stepped together, one second per call.

    ``signal`` and the queues always describe the second just simulated; ``clock`` is the next second to run.
    """

    def __init__(
        self,
        *,
        plan: RingBarrierPlan,
        profile: VolumeProfile,
        seed: int,
        dynamics: DynamicsConfig | None = None,
        reward: RewardConfig | None = None,
        overrides: Iterable[VolumeOverride] = (),
        start_t: int = 0,
    ) -> None:
        self.plan = plan
        self.dynamics = dynamics or DynamicsConfig()
        self.reward_config = reward or RewardConfig()
        self.stream = ArrivalStream(
            profile, seed, deterministic=self.dynamics.deterministic_arrivals, overrides=overrides
        )
        self.sim = IntersectionSim(
            self.dynamics, conflicts=plan.conflict_set(), served_phases=served_phases(plan)
        )
        self.signal = RingBarrierState.initial(plan)
        self.clock = SimClock(start_t, self.dynamics.start_day_of_week)

    def mask(self) -> ActionMask:
        return valid_actions(self.signal, self.plan)

    def observe(self) -> Observation:
        return Observation(
            clock=self.clock,
            signal=self.signal,
            queues=self.sim.queue_lengths(),
            detectors=self.sim.detector_occupancy(self.clock.t),
            mask=self.mask(),
        )

    def step(self, action: Action, lockout_s: int = 0) -> Step:
        signal = apply_action(self.signal, action, self.plan)
        if lockout_s:
            signal = signal.with_lockout(lockout_s)
        signal = tick_signal(signal, self.plan)
        outcome = tick_sim(self.sim, indications(signal, self.plan), self.clock, self.stream)
        self.signal = signal
        self.clock = self.clock.advance()
        return Step(action=action, outcome=outcome, reward=compute_reward(outcome, self.reward_config), signal=signal)
