from __future__ import annotations

from ._checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ._network import (
    ConvSpec,
    DenseSpec,
    LayerSpec,
    LossKind,
    NetworkParams,
    NetworkSpec,
    PoolSpec,
    conv2d,
    forward,
    gradients,
    init_params,
)
from ._policy import EpsilonSchedule, Stage, epsilon_at, masked_argmax, q_target, select_action, stage_at
from ._replay import ReplayBuffer, Transition
from ._train import (
    AdamState,
    DaySummary,
    StepRecord,
    TrainConfig,
    TrainingResult,
    TrainStepResult,
    adam_update,
    run_training,
    train_step,
)

__all__ = [
    "AdamState",
    "Checkpoint",
    "ConvSpec",
    "DaySummary",
    "DenseSpec",
    "EpsilonSchedule",
    "LayerSpec",
    "LossKind",
    "NetworkParams",
    "NetworkSpec",
    "PoolSpec",
    "ReplayBuffer",
    "Stage",
    "StepRecord",
    "TrainConfig",
    "TrainStepResult",
    "TrainingResult",
    "Transition",
    "adam_update",
    "conv2d",
    "epsilon_at",
    "forward",
    "gradients",
    "init_params",
    "load_checkpoint",
    "masked_argmax",
    "q_target",
    "run_training",
    "save_checkpoint",
    "select_action",
    "stage_at",
    "train_step",
]
