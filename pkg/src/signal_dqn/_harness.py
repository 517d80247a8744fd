"""Experiment orchestration: simulated days, training runs, controller comparison and CSV output."""

from __future__ import annotations

import csv
import hashlib
import logging
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from ._config import ExperimentConfig, ScenarioSpec
from ._controllers import (
    Controller,
    DRLController,
    FixedTimeController,
    SemiActuatedController,
    timing_plans_from_profile,
)
from ._dqn import DaySummary, NetworkSpec, StepRecord, TrainingResult, load_checkpoint, run_training, save_checkpoint
from ._encoder import layout_for
from ._env import IntersectionEnv
from ._exceptions import ConfigurationError, SignalDQNError
from ._reward import RewardConfig
from ._sim import Vehicle
from ._types import SECONDS_PER_DAY, Approach

logger = logging.getLogger(__name__)

BIN_S = 900

VEHICLE_FIELDS = (
    "day",
    "controller",
    "vehicle_id",
    "approach",
    "arrival_s",
    "at_stopline_s",
    "depart_s",
    "travel_time_s",
    "delay_s",
)
DAILY_FIELDS = ("day", "controller", "vehicles", "unserved", "total_travel_time_s", "total_delay_s", "mean_delay_s")
BIN_FIELDS = ("controller", "bin_start_s", "bin_end_s", "vehicles", "mean_delay_s", "in_scenario")
COMPARISON_FIELDS = ("controller", "mean_delay_s", "reduction_vs_drl_pct", "scenario_mean_delay_s")
CURVE_FIELDS = ("size", "day", "stage", "epsilon", "total_travel_time_s", "mean_delay_s", "mean_loss")
STEP_FIELDS = ("size", "global_t", "day", "stage", "epsilon", "loss", "reward")
SWEEP_FIELDS = ("field", "value", "mean_delay_s", "mean_reward")


# --- Metrics ---


@dataclass(kw_only=True)
class MetricsLog:
    """Everything recorded while one controller ran one day."""

    controller: str
    day: int
    seed: int
    vehicles: list[Vehicle] = field(default_factory=list[Vehicle])
    # Vehicles still queued or in transit at ``end_s``; they are charged up to ``end_s``.
    waiting: list[Vehicle] = field(default_factory=list[Vehicle])
    end_s: int = 0
    queues: NDArray[np.int32] = field(default_factory=lambda: np.zeros((0, len(Approach)), dtype=np.int32))
    rewards: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    ring1_phase: NDArray[np.int16] = field(default_factory=lambda: np.zeros(0, dtype=np.int16))
    ring1_interval: NDArray[np.int8] = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    arrived: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    departed: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    in_system: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    arrival_digest: str = ""

    def charged(self) -> Iterator[tuple[Vehicle, int, int]]:
        """``(vehicle, second it left or the day ended, delay)`` for every vehicle that reached the stop line."""
        for v in (*self.vehicles, *self.waiting):
            delay = v.delay_at(self.end_s)
            if delay is not None:
                yield v, v.depart_s if v.depart_s is not None else self.end_s - 1, delay

    @property
    def total_travel_time_s(self) -> int:
        return sum(v.travel_time_at(self.end_s) for v in (*self.vehicles, *self.waiting))

    @property
    def total_delay_s(self) -> int:
        return sum(delay for _, _, delay in self.charged())

    @property
    def mean_delay_s(self) -> float:
        delays = [delay for _, _, delay in self.charged()]
        return sum(delays) / len(delays) if delays else 0.0

    @property
    def unserved(self) -> int:
        return len(self.waiting)


def run_day(
    controller: Controller,
    config: ExperimentConfig,
    seed: int,
    day_index: int = 0,
    scenario: ScenarioSpec | None = None,
) -> MetricsLog:
    """Simulate one whole day under ``controller``; arrivals depend only on ``(seed, day_index)`` and the scenario."""
    env = IntersectionEnv(
        plan=config.plan,
        profile=config.profile,
        seed=seed,
        dynamics=config.dynamics,
        reward=config.reward,
        overrides=scenario.overrides if scenario is not None else (),
        start_t=day_index * SECONDS_PER_DAY,
    )
    controller.reset()
    n = SECONDS_PER_DAY
    log = MetricsLog(
        controller=controller.name,
        day=day_index,
        seed=seed,
        queues=np.zeros((n, len(Approach)), dtype=np.int32),
        rewards=np.zeros(n),
        ring1_phase=np.zeros(n, dtype=np.int16),
        ring1_interval=np.zeros(n, dtype=np.int8),
        arrived=np.zeros(n, dtype=np.int64),
        departed=np.zeros(n, dtype=np.int64),
        in_system=np.zeros(n, dtype=np.int64),
    )
    arrivals = np.zeros((n, len(Approach)), dtype=np.int64)
    for i in range(n):
        observation = env.observe()
        action = controller.decide(observation)
        try:
            step = env.step(action)
        except SignalDQNError:
            logger.error(
                "%s aborted on day %d at t=%d (action %s)", controller.name, day_index, observation.clock.t, action.name
            )
            raise
        outcome = step.outcome
        arrivals[i] = [a.arrivals for a in outcome.approaches]
        log.queues[i] = [a.queue_length for a in outcome.approaches]
        log.rewards[i] = step.reward
        log.ring1_phase[i] = step.signal.ring1.phase
        log.ring1_interval[i] = step.signal.ring1.interval
        log.arrived[i] = env.sim.arrived_total()
        log.departed[i] = env.sim.departed_total()
        log.in_system[i] = env.sim.queued_total() + env.sim.in_transit_count()
        log.vehicles.extend(outcome.departures)
    log.waiting = env.sim.unserved()
    log.end_s = env.clock.t
    log.arrival_digest = hashlib.sha256(arrivals.tobytes()).hexdigest()
    logger.info(
        "%s day %d: %d vehicles, mean delay %.2f s, %d still in system",
        controller.name,
        day_index,
        len(log.vehicles),
        log.mean_delay_s,
        log.unserved,
    )
    return log


# --- Controllers ---


def baseline_controllers(config: ExperimentConfig) -> tuple[SemiActuatedController, FixedTimeController]:
    schedule = timing_plans_from_profile(config.profile, config.plan, config.timing, config.dynamics)
    for window in schedule.windows:
        plan = schedule.plans[window.plan]
        logger.debug(
            "timing plan %s [%d, %d): cycle %d s splits %s",
            plan.id,
            window.start_s,
            window.end_s,
            plan.cycle_s,
            plan.splits,
        )
    return SemiActuatedController(config.actuated, schedule, config.plan), FixedTimeController(schedule, config.plan)


def drl_controller(config: ExperimentConfig, checkpoint: Path) -> DRLController:
    loaded = load_checkpoint(checkpoint)
    return DRLController(loaded.spec, loaded.params, layout_for(loaded.spec.input_size, config.plan))


def run_days(
    controller: Controller, config: ExperimentConfig, scenario: ScenarioSpec | None = None
) -> list[MetricsLog]:
    """The held-out evaluation days."""
    return [run_day(controller, config, config.evaluation_seed, day, scenario) for day in range(config.evaluation_days)]


# --- Training ---


@dataclass(frozen=True, slots=True, kw_only=True)
class TrainingArtifacts:
    checkpoints: dict[int, Path]
    curves: dict[int, tuple[DaySummary, ...]]


def _train_one(
    config: ExperimentConfig,
    size: int,
    on_step: Callable[[StepRecord], None] | None = None,
    days: int | None = None,
) -> tuple[NetworkSpec, TrainingResult]:
    spec = NetworkSpec.for_size(size)
    env = IntersectionEnv(
        plan=config.plan, profile=config.profile, seed=config.seed, dynamics=config.dynamics, reward=config.reward
    )
    days = config.effective_training_days() if days is None else days
    logger.info("training %dx%d network for %d days", size, size, days)
    result = run_training(
        env,
        network=spec,
        layout=layout_for(size, config.plan),
        schedule=config.effective_schedule(),
        cfg=config.train,
        days=days,
        seed=config.seed,
        on_step=on_step,
    )
    return spec, result


def _open_csv(path: Path, fields: Sequence[str]) -> tuple[TextIO, csv.DictWriter[str]]:
    f = path.open("w", encoding="utf-8", newline="")
    writer = csv.DictWriter(f, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    return f, writer


def _optional(value: float | None) -> float | str:
    return "" if value is None else value


def train_experiment(
    config: ExperimentConfig, out_dir: Path, sizes: Iterable[int] | None = None, days: int | None = None
) -> TrainingArtifacts:
    """Train one network per size, writing checkpoints, the per-day learning curve and the per-step log.

    ``days`` replaces the compressed number of training days; the compressed schedule is kept.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    sizes = tuple(config.network.sizes if sizes is None else sizes)
    checkpoints: dict[int, Path] = {}
    curves: dict[int, tuple[DaySummary, ...]] = {}
    curve_file, curve_writer = _open_csv(out_dir / "learning_curve.csv", CURVE_FIELDS)
    step_file, step_writer = _open_csv(out_dir / "training_steps.csv", STEP_FIELDS)
    with curve_file, step_file:
        for size in sizes:

            def record_step(record: StepRecord, size: int = size) -> None:
                step_writer.writerow(
                    {
                        "size": size,
                        "global_t": record.global_t,
                        "day": record.day,
                        "stage": record.stage.value,
                        "epsilon": record.epsilon,
                        "loss": record.loss,
                        "reward": record.reward,
                    }
                )

            spec, result = _train_one(config, size, record_step, days)
            for day in result.days:
                curve_writer.writerow(
                    {
                        "size": size,
                        "day": day.day,
                        "stage": day.stage.value,
                        "epsilon": day.epsilon,
                        "total_travel_time_s": day.total_travel_time_s,
                        "mean_delay_s": day.mean_delay_s,
                        "mean_loss": _optional(day.mean_loss),
                    }
                )
            path = out_dir / f"checkpoint_{size}.npz"
            save_checkpoint(path, spec, result.params, result.adam.step)
            checkpoints[size] = path
            curves[size] = result.days
            logger.info("wrote %s after %d gradient steps", path, result.gradient_steps)
    return TrainingArtifacts(checkpoints=checkpoints, curves=curves)


def evaluate(config: ExperimentConfig, checkpoint: Path) -> list[MetricsLog]:
    """Greedy agent alone on the evaluation days."""
    logs = run_days(drl_controller(config, checkpoint), config, config.active_scenario())
    mean = _pooled_mean(logs)
    logger.info("evaluation over %d days: mean delay %.2f s", len(logs), mean)
    return logs


# --- Comparison ---


@dataclass(frozen=True, slots=True, kw_only=True)
class DelayBin:
    controller: str
    bin_start_s: int
    bin_end_s: int
    vehicles: int
    mean_delay_s: float
    in_scenario: bool


@dataclass(frozen=True, slots=True, kw_only=True)
class ControllerSummary:
    controller: str
    mean_delay_s: float
    reduction_vs_drl_pct: float
    scenario_mean_delay_s: float | None


@dataclass(frozen=True, slots=True, kw_only=True)
class Comparison:
    logs: dict[str, list[MetricsLog]]
    bins: list[DelayBin]
    summaries: list[ControllerSummary]
    scenario: ScenarioSpec | None = None


def percentage_reduction(drl_mean: float, other_mean: float) -> float:
    """How much lower the agent's delay is than ``other_mean``, in percent of ``other_mean``."""
    if other_mean == 0:
        return 0.0
    return (other_mean - drl_mean) / other_mean * 100


def _pooled_mean(logs: Sequence[MetricsLog], keep: Callable[[int], bool] | None = None) -> float:
    """Mean charged delay; ``keep`` filters on the second of day each vehicle left or was last charged."""
    delays = [
        delay
        for log in logs
        for _, left, delay in log.charged()
        if keep is None or keep(left % SECONDS_PER_DAY)
    ]
    return sum(delays) / len(delays) if delays else 0.0


def bin_delays(
    controller: str, logs: Sequence[MetricsLog], scenario: ScenarioSpec | None = None, bin_s: int = BIN_S
) -> list[DelayBin]:
    """Mean delay by departure time of day, pooled over all days; vehicles left waiting fall in the last bin."""
    n_bins = SECONDS_PER_DAY // bin_s
    totals = np.zeros(n_bins, dtype=np.int64)
    counts = np.zeros(n_bins, dtype=np.int64)
    for log in logs:
        for _, left, delay in log.charged():
            i = (left % SECONDS_PER_DAY) // bin_s
            totals[i] += delay
            counts[i] += 1
    windows = scenario.windows if scenario is not None else []
    return [
        DelayBin(
            controller=controller,
            bin_start_s=i * bin_s,
            bin_end_s=(i + 1) * bin_s,
            vehicles=int(counts[i]),
            mean_delay_s=float(totals[i] / counts[i]) if counts[i] else 0.0,
            in_scenario=any(start < (i + 1) * bin_s and i * bin_s < end for start, end in windows),
        )
        for i in range(n_bins)
    ]


def summarize(
    logs: Mapping[str, Sequence[MetricsLog]], scenario: ScenarioSpec | None = None
) -> list[ControllerSummary]:
    drl_mean = _pooled_mean(logs["drl"]) if "drl" in logs else 0.0
    summaries: list[ControllerSummary] = []
    for name, runs in logs.items():
        mean = _pooled_mean(runs)
        scenario_mean = None
        if scenario is not None:
            scenario_mean = _pooled_mean(runs, scenario.covers)
        summaries.append(
            ControllerSummary(
                controller=name,
                mean_delay_s=mean,
                reduction_vs_drl_pct=percentage_reduction(drl_mean, mean) if "drl" in logs else 0.0,
                scenario_mean_delay_s=scenario_mean,
            )
        )
    return summaries


def compare_controllers(config: ExperimentConfig, checkpoint: Path, scenario: str | None = None) -> Comparison:
    """Agent, semi-actuated and fixed-time control over the same held-out days."""
    if scenario is not None:
        config = config.model_copy(update={"scenario": scenario})
        if scenario not in config.scenarios:
            raise ConfigurationError(f"unknown scenario {scenario!r}, known: {sorted(config.scenarios)}")
    spec = config.active_scenario()
    controllers: list[Controller] = [drl_controller(config, checkpoint), *baseline_controllers(config)]
    logs = {c.name: run_days(c, config, spec) for c in controllers}

    for day in range(config.evaluation_days):
        digests = {name: runs[day].arrival_digest for name, runs in logs.items()}
        if len(set(digests.values())) != 1:
            raise SignalDQNError(f"arrival streams differ between controllers on day {day}: {digests}")

    bins = [b for name, runs in logs.items() for b in bin_delays(name, runs, spec)]
    summaries = summarize(logs, spec)
    for s in summaries:
        logger.info(
            "%s: mean delay %.2f s, agent reduction %.1f%%%s",
            s.controller,
            s.mean_delay_s,
            s.reduction_vs_drl_pct,
            "" if s.scenario_mean_delay_s is None else f", scenario mean delay {s.scenario_mean_delay_s:.2f} s",
        )
    return Comparison(logs=logs, bins=bins, summaries=summaries, scenario=spec)


# --- Output ---


def _write_rows(path: Path, fields: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    f, writer = _open_csv(path, fields)
    with f:
        writer.writerows(rows)
    return path


def _vehicle_rows(logs: Sequence[MetricsLog]) -> Iterable[dict[str, Any]]:
    for log in logs:
        for v in (*log.vehicles, *log.waiting):
            yield {
                "day": log.day,
                "controller": log.controller,
                "vehicle_id": v.id,
                "approach": v.approach.name.lower(),
                "arrival_s": v.arrival_s,
                "at_stopline_s": v.at_stopline_s,
                "depart_s": v.depart_s,
                "travel_time_s": v.travel_time_at(log.end_s),
                "delay_s": v.delay_at(log.end_s),
            }


def write_outputs(out_dir: Path, logs: Sequence[MetricsLog], comparison: Comparison | None = None) -> list[Path]:
    """Write per-vehicle and per-day CSVs, plus the binned comparison when given one."""
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(logs, key=lambda log: (log.day, log.controller))
    paths = [
        _write_rows(out_dir / "vehicles.csv", VEHICLE_FIELDS, _vehicle_rows(ordered)),
        _write_rows(
            out_dir / "daily.csv",
            DAILY_FIELDS,
            (
                {
                    "day": log.day,
                    "controller": log.controller,
                    "vehicles": len(log.vehicles),
                    "unserved": len(log.waiting),
                    "total_travel_time_s": log.total_travel_time_s,
                    "total_delay_s": log.total_delay_s,
                    "mean_delay_s": log.mean_delay_s,
                }
                for log in ordered
            ),
        ),
    ]
    if comparison is not None:
        paths.append(
            _write_rows(
                out_dir / "delay_bins.csv",
                BIN_FIELDS,
                (
                    {
                        "controller": b.controller,
                        "bin_start_s": b.bin_start_s,
                        "bin_end_s": b.bin_end_s,
                        "vehicles": b.vehicles,
                        "mean_delay_s": b.mean_delay_s,
                        "in_scenario": int(b.in_scenario),
                    }
                    for b in comparison.bins
                ),
            )
        )
        paths.append(
            _write_rows(
                out_dir / "comparison.csv",
                COMPARISON_FIELDS,
                (
                    {
                        "controller": s.controller,
                        "mean_delay_s": s.mean_delay_s,
                        "reduction_vs_drl_pct": s.reduction_vs_drl_pct,
                        "scenario_mean_delay_s": _optional(s.scenario_mean_delay_s),
                    }
                    for s in comparison.summaries
                ),
            )
        )
    for path in paths:
        logger.info("wrote %s", path)
    return paths


# --- Reward sweep ---


@dataclass(frozen=True, slots=True, kw_only=True)
class SweepResult:
    field: str
    value: float
    mean_delay_s: float
    mean_reward: float


def sweep_reward(
    config: ExperimentConfig, reward_field: str, values: Sequence[float], out_dir: Path | None = None
) -> list[SweepResult]:
    """Train a fresh agent per reward constant and score it on the evaluation days."""
    results: list[SweepResult] = []
    for value in values:
        try:
            reward = RewardConfig.model_validate({**config.reward.model_dump(), reward_field: value})
        except ValidationError as exc:
            raise ConfigurationError(f"cannot set reward.{reward_field} = {value!r}: {exc}") from exc
        variant = config.model_copy(update={"reward": reward})
        spec, trained = _train_one(variant, variant.network.size)
        controller = DRLController(spec, trained.params, layout_for(spec.input_size, variant.plan))
        logs = run_days(controller, variant, variant.active_scenario())
        result = SweepResult(
            field=reward_field,
            value=value,
            mean_delay_s=_pooled_mean(logs),
            mean_reward=float(np.mean([log.rewards.mean() for log in logs])),
        )
        logger.info("reward.%s = %r: mean delay %.2f s", reward_field, value, result.mean_delay_s)
        results.append(result)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = _write_rows(
            out_dir / "reward_sweep.csv",
            SWEEP_FIELDS,
            (
                {"field": r.field, "value": r.value, "mean_delay_s": r.mean_delay_s, "mean_reward": r.mean_reward}
                for r in results
            ),
        )
        logger.info("wrote %s", path)
    return results
