from __future__ import annotations

from collections.abc import Mapping

import pytest

from signal_dqn import (
    Approach,
    DynamicsConfig,
    ExperimentConfig,
    IntersectionEnv,
    RingBarrierPlan,
    VolumeProfile,
)


@pytest.fixture
def plan() -> RingBarrierPlan:
    return RingBarrierPlan.two_phase()


@pytest.fixture
def deterministic() -> DynamicsConfig:
    return DynamicsConfig(deterministic_arrivals=True)


def make_env(
    plan: RingBarrierPlan,
    volumes: Mapping[Approach, float] | None = None,
    *,
    seed: int = 0,
    dynamics: DynamicsConfig | None = None,
) -> IntersectionEnv:
    profile = VolumeProfile() if volumes is None else VolumeProfile.constant(volumes)
    return IntersectionEnv(plan=plan, profile=profile, seed=seed, dynamics=dynamics)


@pytest.fixture
def quiet_config() -> ExperimentConfig:
    """No traffic at all; the controllers still cycle."""
    return ExperimentConfig(profile=VolumeProfile.constant({}), evaluation_days=1)
