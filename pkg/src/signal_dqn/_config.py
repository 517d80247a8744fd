from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Literal

from pydantic import Field, ValidationError, model_validator

from ._controllers import ActuatedConfig, PlanConfig
from ._dqn import EpsilonSchedule, TrainConfig
from ._exceptions import ConfigurationError
from ._reward import RewardConfig
from ._signal import RingBarrierPlan
from ._sim import DynamicsConfig, VolumeOverride, VolumeProfile
from ._types import Approach, ConfigModel

logger = logging.getLogger(__name__)

EncoderSize = Literal[80, 24]


class ScenarioSpec(ConfigModel):
    """Named volume overrides applied on top of the base profile."""

    overrides: tuple[VolumeOverride, ...]
    description: str = ""

    @property
    def windows(self) -> list[tuple[int, int]]:
        return [(o.start_s, o.end_s) for o in self.overrides]

    def covers(self, second_of_day: int) -> bool:
        return any(start <= second_of_day < end for start, end in self.windows)


def _default_scenarios() -> dict[str, ScenarioSpec]:
    def surge(start_h: int, end_h: int, description: str) -> ScenarioSpec:
        override = VolumeOverride(approach=Approach.SOUTHBOUND, start_s=start_h * 3600, end_s=end_h * 3600, vph=600)
        return ScenarioSpec(overrides=(override,), description=description)

    return {
        "surge": surge(21, 23, "southbound minor street at 600 vph, 21:00-23:00"),
        "surge-early": surge(20, 21, "southbound minor street at 600 vph, 20:00-21:00"),
    }


class NetworkConfig(ConfigModel):
    sizes: tuple[EncoderSize, ...] = Field(default=(80,), min_length=1)

    @property
    def size(self) -> EncoderSize:
        """Size used for evaluation and comparison."""
        return self.sizes[0]


class ExperimentConfig(ConfigModel):
    profile: VolumeProfile = Field(default_factory=VolumeProfile)
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)
    plan: RingBarrierPlan = Field(default_factory=RingBarrierPlan.two_phase)
    timing: PlanConfig = Field(default_factory=PlanConfig)
    actuated: ActuatedConfig = Field(default_factory=ActuatedConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    schedule: EpsilonSchedule = Field(default_factory=EpsilonSchedule)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    scenarios: dict[str, ScenarioSpec] = Field(default_factory=_default_scenarios)
    scenario: str | None = Field(default=None, description="scenario applied to evaluation and comparison days")
    training_days: int = Field(default=61, ge=1)
    evaluation_days: int = Field(default=2, ge=1)
    seed: int = Field(default=0, ge=0)
    evaluation_seed: int = Field(default=1, ge=0)
    time_compression: float = Field(default=1.0, gt=0, le=1)

    @model_validator(mode="after")
    def _check_references(self) -> ExperimentConfig:
        if self.scenario is not None and self.scenario not in self.scenarios:
            raise ValueError(f"unknown scenario {self.scenario!r}, known: {sorted(self.scenarios)}")
        if self.evaluation_seed == self.seed:
            raise ValueError("evaluation_seed must differ from the training seed")
        return self

    def effective_schedule(self) -> EpsilonSchedule:
        return self.schedule.scaled(self.time_compression)

    def effective_training_days(self) -> int:
        return math.ceil(self.training_days * self.time_compression)

    def active_scenario(self) -> ScenarioSpec | None:
        return None if self.scenario is None else self.scenarios[self.scenario]


def load_config(path: Path) -> ExperimentConfig:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    logger.debug(
        "loaded %s: %d training days (x%.3g), %d evaluation days, seed %d",
        path,
        config.training_days,
        config.time_compression,
        config.evaluation_days,
        config.seed,
    )
    return config
