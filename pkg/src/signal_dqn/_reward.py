from __future__ import annotations

from pydantic import Field

from ._sim import TickOutcome
from ._types import ConfigModel


class RewardConfig(ConfigModel):
    discharge_reward: float = Field(default=20.0, ge=0)
    red_wait_penalty: float = Field(default=1.0, ge=0)
    residual_penalty: float = Field(default=5.0, ge=0)
    # Stopped vehicles are queued by construction in the vertical-queue model; kept for reporting.
    queue_speed_threshold_kph: float = Field(default=15.0, ge=0)


def compute_reward(outcome: TickOutcome, cfg: RewardConfig) -> float:
    """Utility for one second: discharges minus red waiting minus queues left behind by a terminated green."""
    return (
        cfg.discharge_reward * outcome.total_discharged
        - cfg.red_wait_penalty * outcome.queued_on_red
        - cfg.residual_penalty * outcome.residual_total
    )
