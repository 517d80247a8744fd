from ._config import ExperimentConfig, NetworkConfig, ScenarioSpec, load_config
from ._controllers import (
    ActuatedConfig,
    Controller,
    DRLController,
    FixedTimeController,
    FixedTimePlan,
    PlanConfig,
    PlanSchedule,
    PlanWindow,
    SemiActuatedController,
    drl_policy_step,
    fixed_time_step,
    semi_actuated_step,
    timing_plans_from_profile,
    webster_plan,
)
from ._dqn import (
    AdamState,
    Checkpoint,
    DaySummary,
    EpsilonSchedule,
    LossKind,
    NetworkParams,
    NetworkSpec,
    ReplayBuffer,
    Stage,
    TrainConfig,
    Transition,
    epsilon_at,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    masked_argmax,
    q_target,
    run_training,
    save_checkpoint,
    select_action,
    stage_at,
    train_step,
)
from ._encoder import EncoderLayout, FrameStack, encode, layout_for, pack_matrix, push_frame, render_ascii
from ._env import IntersectionEnv, Observation, Step
from ._exceptions import (
    CheckpointError,
    ConfigurationError,
    NonFiniteLossError,
    OversaturatedError,
    RuleViolationError,
    SafetyViolationError,
    ShapeMismatchError,
    SignalDQNError,
    UnknownApproachError,
    UnsupportedSizeError,
)
from ._harness import (
    Comparison,
    MetricsLog,
    compare_controllers,
    evaluate,
    run_day,
    sweep_reward,
    train_experiment,
    write_outputs,
)
from ._reward import RewardConfig, compute_reward
from ._signal import (
    Phase,
    RingBarrierPlan,
    RingBarrierState,
    RingState,
    apply_action,
    indications,
    tick_signal,
    valid_actions,
)
from ._sim import (
    ArrivalStream,
    DynamicsConfig,
    IntersectionSim,
    SimClock,
    TickOutcome,
    Vehicle,
    VolumeOverride,
    VolumeProfile,
    queue_length,
    tick_sim,
)
from ._types import Action, Approach, Display, Interval

__all__ = [
    "Action",
    "ActuatedConfig",
    "AdamState",
    "Approach",
    "ArrivalStream",
    "Checkpoint",
    "CheckpointError",
    "Comparison",
    "ConfigurationError",
    "Controller",
    "DRLController",
    "DaySummary",
    "Display",
    "DynamicsConfig",
    "EncoderLayout",
    "EpsilonSchedule",
    "ExperimentConfig",
    "FixedTimeController",
    "FixedTimePlan",
    "FrameStack",
    "IntersectionEnv",
    "IntersectionSim",
    "Interval",
    "LossKind",
    "MetricsLog",
    "NetworkConfig",
    "NetworkParams",
    "NetworkSpec",
    "NonFiniteLossError",
    "Observation",
    "OversaturatedError",
    "Phase",
    "PlanConfig",
    "PlanSchedule",
    "PlanWindow",
    "ReplayBuffer",
    "RewardConfig",
    "RingBarrierPlan",
    "RingBarrierState",
    "RingState",
    "RuleViolationError",
    "SafetyViolationError",
    "ScenarioSpec",
    "SemiActuatedController",
    "ShapeMismatchError",
    "SignalDQNError",
    "SimClock",
    "Stage",
    "Step",
    "TickOutcome",
    "TrainConfig",
    "Transition",
    "UnknownApproachError",
    "UnsupportedSizeError",
    "Vehicle",
    "VolumeOverride",
    "VolumeProfile",
    "apply_action",
    "compare_controllers",
    "compute_reward",
    "drl_policy_step",
    "encode",
    "epsilon_at",
    "evaluate",
    "fixed_time_step",
    "forward",
    "gradients",
    "indications",
    "init_params",
    "layout_for",
    "load_checkpoint",
    "load_config",
    "masked_argmax",
    "pack_matrix",
    "push_frame",
    "q_target",
    "queue_length",
    "render_ascii",
    "run_day",
    "run_training",
    "save_checkpoint",
    "select_action",
    "semi_actuated_step",
    "stage_at",
    "sweep_reward",
    "tick_signal",
    "tick_sim",
    "timing_plans_from_profile",
    "train_experiment",
    "train_step",
    "valid_actions",
    "webster_plan",
]
