from __future__ import annotations

from enum import Enum, IntEnum

from pydantic import BaseModel, ConfigDict

SECONDS_PER_DAY = 86400


class ConfigModel(BaseModel):
    """Base for every JSON-backed configuration block."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class Approach(IntEnum):
    EASTBOUND = 0
    WESTBOUND = 1
    NORTHBOUND = 2
    SOUTHBOUND = 3


MAJOR_APPROACHES = (Approach.EASTBOUND, Approach.WESTBOUND)
MINOR_APPROACHES = (Approach.NORTHBOUND, Approach.SOUTHBOUND)


class Display(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


class Interval(IntEnum):
    GREEN = 0
    YELLOW = 1
    ALL_RED = 2


class Action(IntEnum):
    """Controller actions, in the index order of the Q-value vector."""

    DO_NOTHING = 0
    ADVANCE_RING1 = 1
    ADVANCE_RING2 = 2
    ADVANCE_BOTH = 3
    ADVANCE_TO_BARRIER = 4


N_ACTIONS = len(Action)


def parse_approach(value: object) -> object:
    """Accept approach names ("southbound") wherever configs take an approach id."""
    if isinstance(value, str) and not value.isdigit():
        try:
            return Approach[value.upper()]
        except KeyError:
            raise ValueError(f"unknown approach {value!r}") from None
    return value
