"""Ring-barrier phase machine and the rule checker that gates controller actions."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import Literal

from pydantic import Field, field_validator, model_validator

from ._exceptions import RuleViolationError
from ._sim import default_conflicts
from ._types import (
    MAJOR_APPROACHES,
    MINOR_APPROACHES,
    N_ACTIONS,
    Action,
    Approach,
    ConfigModel,
    Display,
    Interval,
    parse_approach,
)

ActionMask = tuple[bool, ...]

# --- Plan ---


class Phase(ConfigModel):
    id: int
    ring: Literal[1, 2]
    barrier_group: int = Field(ge=0)
    served_approaches: frozenset[Approach]
    min_green_s: int = Field(default=10, ge=1)
    yellow_s: int = Field(default=3, ge=0)
    all_red_s: int = Field(default=1, ge=0)

    @field_validator("served_approaches", mode="before")
    @classmethod
    def _approaches_by_name(cls, value: object) -> object:
        if isinstance(value, (list, tuple, set, frozenset)):
            return [parse_approach(v) for v in value]  # pyright: ignore[reportUnknownVariableType]
        return value

    @property
    def clearance_s(self) -> int:
        return self.yellow_s + self.all_red_s


class RingBarrierPlan(ConfigModel):
    phases: tuple[Phase, ...]
    ring1: tuple[int, ...]
    ring2: tuple[int, ...] = ()
    conflicts: tuple[tuple[Approach, Approach], ...] | None = None

    @field_validator("conflicts", mode="before")
    @classmethod
    def _conflicts_by_name(cls, value: object) -> object:
        if isinstance(value, (list, tuple)):
            return [[parse_approach(a) for a in pair] for pair in value]  # pyright: ignore[reportUnknownVariableType]
        return value

    @model_validator(mode="after")
    def _check_structure(self) -> RingBarrierPlan:
        by_id = {p.id: p for p in self.phases}
        if len(by_id) != len(self.phases):
            raise ValueError("phase ids must be unique")
        groups: list[list[int]] = []
        for ring_no, sequence in ((1, self.ring1), (2, self.ring2)):
            if ring_no == 1 and not sequence:
                raise ValueError("ring 1 needs at least one phase")
            seen: list[int] = []
            for pid in sequence:
                if pid not in by_id:
                    raise ValueError(f"ring {ring_no} references unknown phase {pid}")
                if by_id[pid].ring != ring_no:
                    raise ValueError(f"phase {pid} belongs to ring {by_id[pid].ring}, listed in ring {ring_no}")
                group = by_id[pid].barrier_group
                if seen and seen[-1] != group and group in seen:
                    raise ValueError(f"ring {ring_no}: barrier group {group} is split")
                if not seen or seen[-1] != group:
                    seen.append(group)
            if sequence:
                groups.append(seen)
        if len(groups) == 2 and groups[0] != groups[1]:
            raise ValueError("barriers do not align across rings")
        conflicts = self.conflict_set()
        for a in self.ring1:
            for b in self.ring2:
                pa, pb = by_id[a], by_id[b]
                if pa.barrier_group != pb.barrier_group:
                    continue
                for x in pa.served_approaches:
                    for y in pb.served_approaches:
                        if frozenset((x, y)) in conflicts:
                            raise ValueError(f"concurrent phases {a} and {b} serve conflicting approaches")
        return self

    @classmethod
    def two_phase(cls, *, min_green_s: int = 10, yellow_s: int = 3, all_red_s: int = 1) -> RingBarrierPlan:
        """Major street then minor street, ring 2 mirroring ring 1."""
        timing = {"min_green_s": min_green_s, "yellow_s": yellow_s, "all_red_s": all_red_s}
        return cls(
            phases=(
                Phase(id=1, ring=1, barrier_group=0, served_approaches=frozenset(MAJOR_APPROACHES), **timing),
                Phase(id=2, ring=1, barrier_group=1, served_approaches=frozenset(MINOR_APPROACHES), **timing),
                Phase(id=5, ring=2, barrier_group=0, served_approaches=frozenset(MAJOR_APPROACHES), **timing),
                Phase(id=6, ring=2, barrier_group=1, served_approaches=frozenset(MINOR_APPROACHES), **timing),
            ),
            ring1=(1, 2),
            ring2=(5, 6),
        )

    @property
    def rings(self) -> tuple[tuple[int, ...], ...]:
        return tuple(r for r in (self.ring1, self.ring2) if r)

    def phase(self, phase_id: int) -> Phase:
        for p in self.phases:
            if p.id == phase_id:
                return p
        raise KeyError(phase_id)

    def conflict_set(self) -> frozenset[frozenset[Approach]]:
        if self.conflicts is None:
            return default_conflicts()
        return frozenset(frozenset(pair) for pair in self.conflicts)

    def next_phase(self, ring: int, phase_id: int) -> int:
        sequence = self.rings[ring]
        return sequence[(sequence.index(phase_id) + 1) % len(sequence)]

    def last_before_barrier(self, ring: int, phase_id: int) -> int:
        sequence = self.rings[ring]
        group = self.phase(phase_id).barrier_group
        i = sequence.index(phase_id)
        while i + 1 < len(sequence) and self.phase(sequence[i + 1]).barrier_group == group:
            i += 1
        return sequence[i]

    def crosses_barrier(self, from_phase: int, to_phase: int) -> bool:
        return self.phase(from_phase).barrier_group != self.phase(to_phase).barrier_group

    def approaches_of(self, phase_id: int) -> frozenset[Approach]:
        return self.phase(phase_id).served_approaches


# --- State ---


@dataclass(frozen=True, slots=True, kw_only=True)
class RingState:
    phase: int
    interval: Interval = Interval.GREEN
    time_in_interval_s: int = 0
    target: int | None = None


@dataclass(frozen=True, slots=True, kw_only=True)
class RingBarrierState:
    rings: tuple[RingState, ...]
    lockout_remaining_s: int = 0

    @classmethod
    def initial(cls, plan: RingBarrierPlan) -> RingBarrierState:
        rings = tuple(RingState(phase=sequence[0]) for sequence in plan.rings)
        lockout = max(plan.phase(r.phase).min_green_s for r in rings)
        return cls(rings=rings, lockout_remaining_s=lockout)

    @property
    def ring1(self) -> RingState:
        return self.rings[0]

    def with_lockout(self, seconds: int) -> RingBarrierState:
        """Extend the lockout; a shorter request never shortens a running one."""
        if seconds <= self.lockout_remaining_s:
            return self
        return replace(self, lockout_remaining_s=seconds)


# --- Rule checking ---


def _green_ready(ring: RingState, plan: RingBarrierPlan) -> bool:
    return ring.interval is Interval.GREEN and ring.time_in_interval_s >= plan.phase(ring.phase).min_green_s


def _targets(state: RingBarrierState, action: Action, plan: RingBarrierPlan) -> dict[int, int] | str:
    """Ring index -> target phase for an advance action, or the reason it is not allowed."""
    if state.lockout_remaining_s > 0:
        return f"lockout active for {state.lockout_remaining_s} s"
    n_rings = len(state.rings)
    match action:
        case Action.ADVANCE_RING1 | Action.ADVANCE_RING2:
            ring = 0 if action is Action.ADVANCE_RING1 else 1
            if ring >= n_rings:
                return "plan has no second ring"
            moving = {ring: plan.next_phase(ring, state.rings[ring].phase)}
        case Action.ADVANCE_BOTH:
            moving = {i: plan.next_phase(i, r.phase) for i, r in enumerate(state.rings)}
        case Action.ADVANCE_TO_BARRIER:
            moving = {
                i: plan.last_before_barrier(i, r.phase)
                for i, r in enumerate(state.rings)
                if plan.last_before_barrier(i, r.phase) != r.phase
            }
            if not moving:
                return "every ring already times the phase before the barrier"
        case _:
            return "not an advance action"
    rings_checked = moving if action in (Action.ADVANCE_RING1, Action.ADVANCE_RING2) else range(n_rings)
    for i in rings_checked:
        ring = state.rings[i]
        if ring.interval is not Interval.GREEN:
            return f"ring {i + 1} is clearing"
        if not _green_ready(ring, plan):
            return (
                f"ring {i + 1} green age {ring.time_in_interval_s} s is below "
                f"min green {plan.phase(ring.phase).min_green_s} s"
            )
    crossing = [plan.crosses_barrier(state.rings[i].phase, target) for i, target in moving.items()]
    if any(crossing) and (len(moving) != n_rings or not all(crossing)):
        return "would desynchronize the rings at a barrier"
    return moving


def valid_actions(state: RingBarrierState, plan: RingBarrierPlan) -> ActionMask:
    mask = [False] * N_ACTIONS
    mask[Action.DO_NOTHING] = True
    for action in Action:
        if action is not Action.DO_NOTHING:
            mask[action] = not isinstance(_targets(state, action, plan), str)
    return tuple(mask)


def apply_action(state: RingBarrierState, action: Action, plan: RingBarrierPlan) -> RingBarrierState:
    if action is Action.DO_NOTHING:
        return state
    targets = _targets(state, action, plan)
    if isinstance(targets, str):
        raise RuleViolationError(action=action.name, reason=targets)
    rings = list(state.rings)
    clearance = 0
    for i, target in targets.items():
        ring = rings[i]
        rings[i] = RingState(phase=ring.phase, interval=Interval.YELLOW, time_in_interval_s=0, target=target)
        clearance = max(clearance, plan.phase(ring.phase).clearance_s + 1)
    return RingBarrierState(rings=tuple(rings), lockout_remaining_s=max(state.lockout_remaining_s, clearance))


# --- Timing ---


def _target_of(ring: RingState) -> int:
    return ring.target if ring.target is not None else ring.phase


def tick_signal(state: RingBarrierState, plan: RingBarrierPlan) -> RingBarrierState:
    rings = list(state.rings)
    finished: list[int] = []
    for i, ring in enumerate(rings):
        phase = plan.phase(ring.phase)
        match ring.interval:
            case Interval.GREEN:
                rings[i] = replace(ring, time_in_interval_s=ring.time_in_interval_s + 1)
            case Interval.YELLOW:
                if ring.time_in_interval_s < phase.yellow_s:
                    rings[i] = replace(ring, time_in_interval_s=ring.time_in_interval_s + 1)
                elif phase.all_red_s > 0:
                    rings[i] = replace(ring, interval=Interval.ALL_RED, time_in_interval_s=0)
                else:
                    finished.append(i)
            case Interval.ALL_RED:
                if ring.time_in_interval_s + 1 < phase.all_red_s:
                    rings[i] = replace(ring, time_in_interval_s=ring.time_in_interval_s + 1)
                else:
                    finished.append(i)

    lockout = max(0, state.lockout_remaining_s - 1)
    crossing = [i for i in finished if plan.crosses_barrier(rings[i].phase, _target_of(rings[i]))]
    # Rings crossing a barrier start together, once every ring is ready to cross.
    release_crossing = len(crossing) == len(rings)
    for i in finished:
        ring = rings[i]
        if i in crossing and not release_crossing:
            rings[i] = replace(ring, interval=Interval.ALL_RED)
            continue
        target = _target_of(ring)
        rings[i] = RingState(phase=target)
        lockout = max(lockout, plan.phase(target).min_green_s)
    return RingBarrierState(rings=tuple(rings), lockout_remaining_s=lockout)


def indications(state: RingBarrierState, plan: RingBarrierPlan) -> dict[Approach, Display]:
    shown = {a: Display.RED for a in Approach}
    for ring in state.rings:
        display = {Interval.GREEN: Display.GREEN, Interval.YELLOW: Display.YELLOW}.get(ring.interval)
        if display is None:
            continue
        for a in plan.approaches_of(ring.phase):
            if shown[a] is not Display.GREEN:
                shown[a] = display
    return shown


def served_phases(plan: RingBarrierPlan) -> Mapping[Approach, int]:
    """Ring-1 phase serving each approach."""
    served: dict[Approach, int] = {}
    for pid in plan.ring1:
        for a in plan.approaches_of(pid):
            served.setdefault(a, pid)
    return served
