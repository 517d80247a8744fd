from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from signal_dqn import (
    Action,
    Approach,
    Display,
    Interval,
    Phase,
    RingBarrierPlan,
    RingBarrierState,
    RingState,
    RuleViolationError,
    apply_action,
    indications,
    tick_signal,
    valid_actions,
)

from .conftest import make_env


def _both(
    phase1: int,
    phase2: int,
    interval: Interval = Interval.GREEN,
    age: int = 0,
    *,
    target1: int | None = None,
    target2: int | None = None,
    lockout: int = 0,
) -> RingBarrierState:
    return RingBarrierState(
        rings=(
            RingState(phase=phase1, interval=interval, time_in_interval_s=age, target=target1),
            RingState(phase=phase2, interval=interval, time_in_interval_s=age, target=target2),
        ),
        lockout_remaining_s=lockout,
    )


def _enabled(mask: tuple[bool, ...]) -> set[Action]:
    return {Action(i) for i, ok in enumerate(mask) if ok}


class TestPlan:
    def test_two_phase(self, plan: RingBarrierPlan) -> None:
        assert plan.rings == ((1, 2), (5, 6))
        assert plan.phase(2).clearance_s == 4
        assert plan.crosses_barrier(1, 2)
        assert plan.next_phase(1, 6) == 5

    def test_barriers_must_align(self) -> None:
        major = frozenset({Approach.EASTBOUND, Approach.WESTBOUND})
        minor = frozenset({Approach.NORTHBOUND, Approach.SOUTHBOUND})
        with pytest.raises(ValidationError, match="barriers do not align"):
            RingBarrierPlan(
                phases=(
                    Phase(id=1, ring=1, barrier_group=0, served_approaches=major),
                    Phase(id=2, ring=1, barrier_group=1, served_approaches=minor),
                    Phase(id=5, ring=2, barrier_group=0, served_approaches=major),
                ),
                ring1=(1, 2),
                ring2=(5,),
            )

    def test_concurrent_conflict_rejected(self) -> None:
        major = frozenset({Approach.EASTBOUND, Approach.WESTBOUND})
        minor = frozenset({Approach.NORTHBOUND, Approach.SOUTHBOUND})
        with pytest.raises(ValidationError, match="serve conflicting approaches"):
            RingBarrierPlan(
                phases=(
                    Phase(id=1, ring=1, barrier_group=0, served_approaches=major),
                    Phase(id=5, ring=2, barrier_group=0, served_approaches=minor),
                ),
                ring1=(1,),
                ring2=(5,),
            )

    def test_approaches_by_name(self) -> None:
        phase = Phase.model_validate(
            {"id": 1, "ring": 1, "barrier_group": 0, "served_approaches": ["eastbound", "westbound"]}
        )
        assert phase.served_approaches == {Approach.EASTBOUND, Approach.WESTBOUND}


class TestValidActions:
    def test_below_min_green(self, plan: RingBarrierPlan) -> None:
        assert _enabled(valid_actions(_both(1, 5, age=3), plan)) == {Action.DO_NOTHING}

    def test_min_green_served(self, plan: RingBarrierPlan) -> None:
        assert _enabled(valid_actions(_both(1, 5, age=10), plan)) == {Action.DO_NOTHING, Action.ADVANCE_BOTH}

    def test_lockout_blocks_everything(self, plan: RingBarrierPlan) -> None:
        assert _enabled(valid_actions(_both(1, 5, age=40, lockout=1), plan)) == {Action.DO_NOTHING}

    def test_clearing(self, plan: RingBarrierPlan) -> None:
        state = _both(1, 5, Interval.YELLOW, age=1, target1=2, target2=6)
        assert _enabled(valid_actions(state, plan)) == {Action.DO_NOTHING}

    def test_initial_state(self, plan: RingBarrierPlan) -> None:
        state = RingBarrierState.initial(plan)
        assert state.lockout_remaining_s == 10
        assert _enabled(valid_actions(state, plan)) == {Action.DO_NOTHING}


class TestApplyAction:
    def test_advance_both(self, plan: RingBarrierPlan) -> None:
        state = apply_action(_both(1, 5, age=15), Action.ADVANCE_BOTH, plan)
        assert [(r.phase, r.interval, r.time_in_interval_s, r.target) for r in state.rings] == [
            (1, Interval.YELLOW, 0, 2),
            (5, Interval.YELLOW, 0, 6),
        ]
        assert state.lockout_remaining_s == 5

    def test_below_min_green_rejected(self, plan: RingBarrierPlan) -> None:
        with pytest.raises(RuleViolationError, match="below min green") as exc_info:
            apply_action(_both(1, 5, age=9), Action.ADVANCE_BOTH, plan)
        assert exc_info.value.action == "ADVANCE_BOTH"

    def test_single_ring_across_barrier_rejected(self, plan: RingBarrierPlan) -> None:
        with pytest.raises(RuleViolationError, match="desynchronize"):
            apply_action(_both(1, 5, age=20), Action.ADVANCE_RING1, plan)

    def test_do_nothing_is_identity(self, plan: RingBarrierPlan) -> None:
        state = _both(1, 5, age=3, lockout=7)
        assert apply_action(state, Action.DO_NOTHING, plan) is state

    def test_with_lockout_only_extends(self, plan: RingBarrierPlan) -> None:
        state = _both(1, 5, lockout=7)
        assert state.with_lockout(3).lockout_remaining_s == 7
        assert state.with_lockout(12).lockout_remaining_s == 12


class TestTickSignal:
    def test_green_ages(self, plan: RingBarrierPlan) -> None:
        assert tick_signal(_both(1, 5, age=4), plan).ring1.time_in_interval_s == 5

    def test_yellow_counts_up(self, plan: RingBarrierPlan) -> None:
        state = tick_signal(_both(1, 5, Interval.YELLOW, age=2, target1=2, target2=6), plan)
        assert (state.ring1.interval, state.ring1.time_in_interval_s) == (Interval.YELLOW, 3)

    def test_yellow_to_all_red(self, plan: RingBarrierPlan) -> None:
        state = tick_signal(_both(1, 5, Interval.YELLOW, age=3, target1=2, target2=6), plan)
        assert (state.ring1.interval, state.ring1.time_in_interval_s) == (Interval.ALL_RED, 0)

    def test_all_red_to_next_green(self, plan: RingBarrierPlan) -> None:
        state = tick_signal(_both(1, 5, Interval.ALL_RED, age=1, target1=2, target2=6, lockout=1), plan)
        assert [(r.phase, r.interval, r.time_in_interval_s) for r in state.rings] == [
            (2, Interval.GREEN, 0),
            (6, Interval.GREEN, 0),
        ]
        assert state.lockout_remaining_s == 10

    def test_lockout_counts_down(self, plan: RingBarrierPlan) -> None:
        assert tick_signal(_both(1, 5, age=12, lockout=3), plan).lockout_remaining_s == 2

    def test_full_clearance_sequence(self, plan: RingBarrierPlan) -> None:
        state = apply_action(_both(1, 5, age=20), Action.ADVANCE_BOTH, plan)
        shown: list[Display] = []
        for _ in range(5):
            state = tick_signal(state, plan)
            shown.append(indications(state, plan)[Approach.EASTBOUND])
        assert shown == [Display.YELLOW, Display.YELLOW, Display.YELLOW, Display.RED, Display.RED]
        assert indications(state, plan)[Approach.NORTHBOUND] is Display.GREEN


class TestIndications:
    def test_major_green(self, plan: RingBarrierPlan) -> None:
        assert indications(_both(1, 5, age=5), plan) == {
            Approach.EASTBOUND: Display.GREEN,
            Approach.WESTBOUND: Display.GREEN,
            Approach.NORTHBOUND: Display.RED,
            Approach.SOUTHBOUND: Display.RED,
        }

    def test_all_red(self, plan: RingBarrierPlan) -> None:
        shown = indications(_both(2, 6, Interval.ALL_RED, target1=1, target2=5), plan)
        assert set(shown.values()) == {Display.RED}


def _fuzz(plan: RingBarrierPlan, steps: int, seed: int) -> None:
    """Random valid actions, checking min green and clearance on every displayed interval."""
    env = make_env(plan, seed=seed)
    rng = np.random.default_rng(seed)
    previous: Display | None = None
    run = 0
    runs: list[tuple[Display, int]] = []
    for _ in range(steps):
        valid = [i for i, ok in enumerate(env.mask()) if ok]
        action = Action(valid[int(rng.integers(len(valid)))])
        lockout = int(rng.integers(0, 16)) if rng.random() < 0.01 else 0
        shown = env.step(action, lockout).outcome.approaches[Approach.EASTBOUND].display
        if shown is previous:
            run += 1
            continue
        if previous is not None:
            runs.append((previous, run))
        previous, run = shown, 1
    for display, length in runs[1:]:
        if display is Display.GREEN:
            assert length >= 10
        elif display is Display.YELLOW:
            assert length == 3
    assert runs[0][0] is Display.GREEN
    assert runs[0][1] >= 10


@pytest.mark.parametrize(
    "steps", [20_000, pytest.param(1_000_000, marks=pytest.mark.slow)], ids=["short", "million"]
)
def test_random_actions_keep_min_green_and_clearance(plan: RingBarrierPlan, steps: int) -> None:
    _fuzz(plan, steps, seed=steps)
