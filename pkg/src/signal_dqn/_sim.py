"""Vertical-queue simulator of a single four-approach intersection.

Vehicles enter the approach link, travel a fixed free-flow time to the stop line and either queue there or
discharge, one second per tick. Queued vehicles have no physical length.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from pydantic import Field, field_validator, model_validator

from ._exceptions import SafetyViolationError, UnknownApproachError
from ._types import (
    MAJOR_APPROACHES,
    MINOR_APPROACHES,
    SECONDS_PER_DAY,
    Approach,
    ConfigModel,
    Display,
    parse_approach,
)

MIN_SEGMENT_S = 3600

# --- Configuration ---


class VolumeSegment(ConfigModel):
    start_s: int = Field(ge=0, le=SECONDS_PER_DAY)
    end_s: int = Field(ge=0, le=SECONDS_PER_DAY)
    volume: float = Field(ge=0, description="vehicles per hour")


def _bands(*pairs: tuple[int, int, float]) -> tuple[VolumeSegment, ...]:
    return tuple(VolumeSegment(start_s=a * 3600, end_s=b * 3600, volume=v) for a, b, v in pairs)


def _default_major() -> tuple[VolumeSegment, ...]:
    return _bands((0, 6, 300), (6, 10, 900), (10, 15, 600), (15, 19, 1000), (19, 23, 400), (23, 24, 150))


def _default_minor() -> tuple[VolumeSegment, ...]:
    return _bands((0, 24, 175))


class VolumeProfile(ConfigModel):
    """Piecewise-constant hourly volumes per approach, covering one whole day."""

    eastbound: tuple[VolumeSegment, ...] = Field(default_factory=_default_major)
    westbound: tuple[VolumeSegment, ...] = Field(default_factory=_default_major)
    northbound: tuple[VolumeSegment, ...] = Field(default_factory=_default_minor)
    southbound: tuple[VolumeSegment, ...] = Field(default_factory=_default_minor)

    @model_validator(mode="after")
    def _check_coverage(self) -> VolumeProfile:
        for approach in Approach:
            cursor = 0
            for segment in self.segments(approach):
                if segment.start_s != cursor:
                    raise ValueError(f"{approach.name.lower()}: segment starts at {segment.start_s}, expected {cursor}")
                if segment.end_s - segment.start_s < MIN_SEGMENT_S:
                    raise ValueError(
                        f"{approach.name.lower()}: segment [{segment.start_s}, {segment.end_s}) is shorter than 1 hour"
                    )
                cursor = segment.end_s
            if cursor != SECONDS_PER_DAY:
                raise ValueError(f"{approach.name.lower()}: segments end at {cursor}, expected {SECONDS_PER_DAY}")
        return self

    @classmethod
    def constant(cls, volumes: Mapping[Approach, float]) -> VolumeProfile:
        full = {a.name.lower(): _bands((0, 24, volumes.get(a, 0.0))) for a in Approach}
        return cls.model_validate(full)

    def segments(self, approach: Approach) -> tuple[VolumeSegment, ...]:
        return getattr(self, approach.name.lower())

    def volume_at(self, approach: Approach, second_of_day: int) -> float:
        for segment in self.segments(approach):
            if segment.start_s <= second_of_day < segment.end_s:
                return segment.volume
        raise ValueError(f"second {second_of_day} outside the profile")

    def volumes_per_second(self) -> NDArray[np.float64]:
        """vph in effect at each second of the day, shape (86400, 4)."""
        out = np.zeros((SECONDS_PER_DAY, len(Approach)), dtype=np.float64)
        for approach in Approach:
            for segment in self.segments(approach):
                out[segment.start_s : segment.end_s, approach] = segment.volume
        return out


class VolumeOverride(ConfigModel):
    approach: Approach
    start_s: int = Field(ge=0, lt=SECONDS_PER_DAY)
    end_s: int = Field(gt=0, le=SECONDS_PER_DAY)
    vph: float = Field(ge=0)

    @field_validator("approach", mode="before")
    @classmethod
    def _approach_by_name(cls, value: object) -> object:
        return parse_approach(value)

    @model_validator(mode="after")
    def _check_window(self) -> VolumeOverride:
        if self.end_s <= self.start_s:
            raise ValueError("override window must end after it starts")
        return self


class DynamicsConfig(ConfigModel):
    free_flow_s: int = Field(default=20, ge=0)
    startup_lost_s: float = Field(default=2.0, ge=0)
    saturation_headway_s: float = Field(default=2.0, gt=0)
    detector_lookahead_s: int = Field(default=2, ge=0)
    deterministic_arrivals: bool = False
    start_day_of_week: int = Field(default=0, ge=0, le=6)


# --- Runtime types ---


@dataclass(frozen=True, slots=True)
class SimClock:
    t: int
    start_day_of_week: int = 0

    @property
    def second_of_day(self) -> int:
        return self.t % SECONDS_PER_DAY

    @property
    def day_index(self) -> int:
        return self.t // SECONDS_PER_DAY

    @property
    def day_of_week(self) -> int:
        return (self.start_day_of_week + self.day_index) % 7

    def advance(self, seconds: int = 1) -> SimClock:
        return SimClock(self.t + seconds, self.start_day_of_week)


@dataclass(slots=True, kw_only=True)
class Vehicle:
    id: int
    approach: Approach
    arrival_s: int
    at_stopline_s: int
    depart_s: int | None = None

    @property
    def delay(self) -> int | None:
        if self.depart_s is None:
            return None
        return self.depart_s - self.at_stopline_s

    @property
    def travel_time(self) -> int | None:
        if self.depart_s is None:
            return None
        return self.depart_s - self.arrival_s

    def delay_at(self, end_s: int) -> int | None:
        """Delay charged by ``end_s``.

        A vehicle still queued accrues delay until ``end_s``; one that has not reached the stop line has none.
        """
        if self.depart_s is not None:
            return self.depart_s - self.at_stopline_s
        if self.at_stopline_s >= end_s:
            return None
        return end_s - self.at_stopline_s

    def travel_time_at(self, end_s: int) -> int:
        if self.depart_s is not None:
            return self.depart_s - self.arrival_s
        return max(0, end_s - self.arrival_s)

    def depart(self, t: int) -> None:
        if self.depart_s is not None:
            raise ValueError(f"vehicle {self.id} already departed at {self.depart_s}")
        if t < self.at_stopline_s:
            raise ValueError(f"vehicle {self.id} cannot depart before reaching the stop line")
        self.depart_s = t


@dataclass(frozen=True, slots=True, kw_only=True)
class ApproachOutcome:
    approach: Approach
    arrivals: int
    discharged: int
    queue_length: int
    display: Display


@dataclass(frozen=True, slots=True, kw_only=True)
class TickOutcome:
    t: int
    approaches: tuple[ApproachOutcome, ...]
    green_terminated: tuple[tuple[Approach, int], ...] = ()
    departures: tuple[Vehicle, ...] = ()

    @property
    def total_discharged(self) -> int:
        return sum(a.discharged for a in self.approaches)

    @property
    def total_arrivals(self) -> int:
        return sum(a.arrivals for a in self.approaches)

    @property
    def queued_on_red(self) -> int:
        return sum(a.queue_length for a in self.approaches if a.display is Display.RED)

    @property
    def residual_total(self) -> int:
        return sum(residual for _, residual in self.green_terminated)


@dataclass(slots=True)
class ApproachState:
    approach: Approach
    served_phase: int | None = None
    queue: deque[Vehicle] = field(default_factory=deque[Vehicle])
    in_transit: deque[Vehicle] = field(default_factory=deque[Vehicle])
    discharging: bool = False
    green_age: int = 0
    credit: float = 0.0
    last_display: Display = Display.RED
    arrived_total: int = 0
    departed_total: int = 0


def default_conflicts() -> frozenset[frozenset[Approach]]:
    return frozenset(frozenset((a, b)) for a in MAJOR_APPROACHES for b in MINOR_APPROACHES)


# --- Arrivals ---


class ArrivalStream:
    """Per-second arrival counts, drawn one day at a time from ``SeedSequence([seed, day])``.

    The counts for second ``t`` depend only on ``(seed, t)``, never on how the signal was operated.
    """

    def __init__(
        self,
        profile: VolumeProfile,
        seed: int,
        *,
        deterministic: bool = False,
        overrides: Iterable[VolumeOverride] = (),
    ) -> None:
        self._seed = seed
        self._deterministic = deterministic
        volumes = profile.volumes_per_second()
        for override in overrides:
            volumes[override.start_s : override.end_s, override.approach] = override.vph
        self._volumes = volumes
        self._day: int | None = None
        self._counts: NDArray[np.int64] = np.zeros((0, len(Approach)), dtype=np.int64)

    @property
    def volumes(self) -> NDArray[np.float64]:
        return self._volumes

    def day_counts(self, day: int) -> NDArray[np.int64]:
        if self._day != day:
            self._counts = self._draw(day)
            self._day = day
        return self._counts

    def sample_arrivals(self, clock: SimClock) -> NDArray[np.int64]:
        """Arrival count per approach for the second ``clock.t``."""
        return self.day_counts(clock.day_index)[clock.second_of_day]

    def _draw(self, day: int) -> NDArray[np.int64]:
        if self._deterministic:
            # Fixed headways: one arrival each time cumulative demand crosses a whole vehicle.
            cumulative = np.floor((np.cumsum(self._volumes, axis=0) + 1e-9) / 3600.0).astype(np.int64)
            return np.diff(cumulative, axis=0, prepend=np.zeros((1, len(Approach)), dtype=np.int64))
        rng = np.random.default_rng(np.random.SeedSequence([self._seed, day]))
        return rng.poisson(self._volumes / 3600.0).astype(np.int64)


# --- Simulator ---


class IntersectionSim:
    def __init__(
        self,
        dynamics: DynamicsConfig | None = None,
        *,
        conflicts: frozenset[frozenset[Approach]] | None = None,
        served_phases: Mapping[Approach, int] | None = None,
    ) -> None:
        self.dynamics = dynamics or DynamicsConfig()
        self._conflicts = default_conflicts() if conflicts is None else conflicts
        served = served_phases or {}
        self.approaches: dict[Approach, ApproachState] = {
            a: ApproachState(approach=a, served_phase=served.get(a)) for a in Approach
        }
        self._next_id = 0

    # --- Observation ---

    def queue_lengths(self) -> tuple[int, ...]:
        return tuple(len(self.approaches[a].queue) for a in Approach)

    def in_transit_count(self) -> int:
        return sum(len(s.in_transit) for s in self.approaches.values())

    def arrived_total(self) -> int:
        return sum(s.arrived_total for s in self.approaches.values())

    def departed_total(self) -> int:
        return sum(s.departed_total for s in self.approaches.values())

    def queued_total(self) -> int:
        return sum(len(s.queue) for s in self.approaches.values())

    def unserved(self) -> list[Vehicle]:
        """Vehicles still queued or in transit, queued ones first on each approach."""
        return [v for a in Approach for v in (*self.approaches[a].queue, *self.approaches[a].in_transit)]

    def detector_occupancy(self, t: int) -> tuple[bool, ...]:
        """Stop-line presence detection: a standing queue or a vehicle within the lookahead."""
        lookahead = self.dynamics.detector_lookahead_s
        occupied: list[bool] = []
        for a in Approach:
            state = self.approaches[a]
            near = bool(state.in_transit) and state.in_transit[0].at_stopline_s - t <= lookahead
            occupied.append(bool(state.queue) or near)
        return tuple(occupied)

    # --- Dynamics ---

    def check_indications(self, indications: Mapping[Approach, Display], t: int) -> None:
        greens = [a for a in Approach if indications[a] is Display.GREEN]
        for i, a in enumerate(greens):
            for b in greens[i + 1 :]:
                if frozenset((a, b)) in self._conflicts:
                    raise SafetyViolationError(t=t, approaches=(int(a), int(b)))

    def tick(self, indications: Mapping[Approach, Display], clock: SimClock, arrivals: Sequence[int]) -> TickOutcome:
        self.check_indications(indications, clock.t)
        dyn = self.dynamics
        outcomes: list[ApproachOutcome] = []
        terminated: list[tuple[Approach, int]] = []
        departures: list[Vehicle] = []
        for a in Approach:
            state = self.approaches[a]
            display = indications[a]
            count = int(arrivals[a])
            for _ in range(count):
                state.in_transit.append(
                    Vehicle(id=self._next_id, approach=a, arrival_s=clock.t, at_stopline_s=clock.t + dyn.free_flow_s)
                )
                self._next_id += 1
            state.arrived_total += count
            while state.in_transit and state.in_transit[0].at_stopline_s <= clock.t:
                state.queue.append(state.in_transit.popleft())

            discharged = 0
            if display is Display.GREEN:
                if state.last_display is not Display.GREEN:
                    state.green_age = 0
                    state.credit = 0.0
                state.green_age += 1
                state.discharging = state.green_age > dyn.startup_lost_s
                effective = min(1.0, max(0.0, state.green_age - dyn.startup_lost_s))
                state.credit += effective / dyn.saturation_headway_s
                while state.queue and state.credit >= 1.0 - 1e-9:
                    vehicle = state.queue.popleft()
                    vehicle.depart(clock.t)
                    departures.append(vehicle)
                    state.credit -= 1.0
                    discharged += 1
                if not state.queue:
                    state.credit = min(state.credit, 1.0)
                state.departed_total += discharged
            else:
                state.discharging = False
                if state.last_display is Display.GREEN and state.queue:
                    terminated.append((a, len(state.queue)))
            state.last_display = display
            outcomes.append(
                ApproachOutcome(
                    approach=a, arrivals=count, discharged=discharged, queue_length=len(state.queue), display=display
                )
            )
        return TickOutcome(
            t=clock.t, approaches=tuple(outcomes), green_terminated=tuple(terminated), departures=tuple(departures)
        )


def tick_sim(
    sim: IntersectionSim, indications: Mapping[Approach, Display], clock: SimClock, stream: ArrivalStream
) -> TickOutcome:
    return sim.tick(indications, clock, stream.sample_arrivals(clock))


def queue_length(sim: IntersectionSim, approach: int) -> int:
    try:
        key = Approach(approach)
    except ValueError:
        raise UnknownApproachError(f"unknown approach id {approach}") from None
    return len(sim.approaches[key].queue)
