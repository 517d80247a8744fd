from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Mapping, Sequence
from pathlib import Path

from ._config import ExperimentConfig, load_config
from ._dqn import DaySummary
from ._encoder import encode, layout_for, pack_matrix, render_ascii
from ._exceptions import ConfigurationError, SignalDQNError
from ._harness import Comparison, compare_controllers, evaluate, sweep_reward, train_experiment, write_outputs
from ._signal import RingBarrierState, RingState
from ._sim import SimClock
from ._types import Interval

logger = logging.getLogger("signal_dqn")


def _config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config is not None else ExperimentConfig()
    update: dict[str, object] = {}
    if getattr(args, "seed", None) is not None:
        update["seed"] = args.seed
    if getattr(args, "scenario", None) is not None:
        update["scenario"] = args.scenario
    if not update:
        return config
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **update})
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def _plots(
    args: argparse.Namespace,
    *,
    curves: Mapping[int, Sequence[DaySummary]] | None = None,
    comparison: Comparison | None = None,
) -> None:
    if not args.plots:
        return
    from ._plots import write_plots

    try:
        write_plots(args.out, curves=curves, comparison=comparison)
    except ImportError as exc:
        logger.warning("skipping plots: %s", exc)


def _train(args: argparse.Namespace) -> None:
    config = _config(args)
    if args.days is not None and args.days < 1:
        raise ConfigurationError(f"--days must be at least 1, got {args.days}")
    artifacts = train_experiment(config, args.out, args.sizes, args.days)
    _plots(args, curves=artifacts.curves)


def _evaluate(args: argparse.Namespace) -> None:
    config = _config(args)
    write_outputs(args.out, evaluate(config, args.checkpoint))


def _compare(args: argparse.Namespace) -> None:
    config = _config(args)
    comparison = compare_controllers(config, args.checkpoint)
    logs = [log for runs in comparison.logs.values() for log in runs]
    write_outputs(args.out, logs, comparison)
    _plots(args, comparison=comparison)


def _sweep(args: argparse.Namespace) -> None:
    sweep_reward(_config(args), args.field, args.values, args.out)


def _dump_state(args: argparse.Namespace) -> None:
    config = load_config(args.config) if args.config is not None else ExperimentConfig()
    plan = config.plan
    layout = layout_for(args.size, plan)
    phase = args.phase if args.phase is not None else plan.ring1[0]
    if phase not in plan.ring1:
        raise ConfigurationError(f"phase {phase} is not in ring 1 {list(plan.ring1)}")
    position = plan.ring1.index(phase)
    interval = Interval[args.interval.upper()]
    rings = tuple(
        RingState(phase=seq[min(position, len(seq) - 1)], interval=interval, time_in_interval_s=args.age)
        for seq in plan.rings
    )
    queues = tuple(args.queues)
    matrix = encode(queues, RingBarrierState(rings=rings), SimClock(args.t, config.dynamics.start_day_of_week), layout)
    if args.packed:
        print(pack_matrix(matrix).tobytes().hex())
    else:
        print(render_ascii(matrix))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signal-dqn", description="Deep Q-learning signal control workbench")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, checkpoint: bool = False) -> None:
        p.add_argument("--config", type=Path, help="experiment JSON; defaults apply when omitted")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="override the training seed")
        if checkpoint:
            p.add_argument("--checkpoint", type=Path, required=True)

    train = sub.add_parser("train", help="train the agent and write checkpoints plus the learning curve")
    common(train)
    train.add_argument("--days", type=int, help="simulated days to train, after time compression")
    train.add_argument("--sizes", type=int, nargs="+", choices=[80, 24], help="state sizes to train")
    train.add_argument("--no-plots", dest="plots", action="store_false")
    train.set_defaults(handler=_train)

    ev = sub.add_parser("evaluate", help="run the trained agent on the evaluation days")
    common(ev, checkpoint=True)
    ev.add_argument("--scenario", help="named volume scenario")
    ev.set_defaults(handler=_evaluate)

    compare = sub.add_parser("compare", help="compare agent, semi-actuated and fixed-time control")
    common(compare, checkpoint=True)
    compare.add_argument("--scenario", help="named volume scenario")
    compare.add_argument("--no-plots", dest="plots", action="store_false")
    compare.set_defaults(handler=_compare)

    sweep = sub.add_parser("sweep-reward", help="train and score one agent per reward constant")
    common(sweep)
    sweep.add_argument("--field", required=True, help="RewardConfig field, e.g. residual_penalty")
    sweep.add_argument("--values", type=float, nargs="+", required=True)
    sweep.set_defaults(handler=_sweep)

    dump = sub.add_parser("dump-state", help="print the encoded state matrix")
    dump.add_argument("--config", type=Path)
    dump.add_argument("--size", type=int, default=80, choices=[80, 24])
    dump.add_argument("--queues", type=int, nargs=4, default=[0, 0, 0, 0], metavar=("EB", "WB", "NB", "SB"))
    dump.add_argument("--phase", type=int, help="ring-1 phase id; ring 2 shows its concurrent phase")
    dump.add_argument("--interval", default="green", choices=["green", "yellow", "all_red"])
    dump.add_argument("--age", type=int, default=0, help="seconds into the interval")
    dump.add_argument("--t", type=int, default=0, help="simulation second")
    fmt = dump.add_mutually_exclusive_group()
    fmt.add_argument("--ascii", action="store_true", default=True)
    fmt.add_argument("--packed", action="store_true", help="hex of the packed bitmap")
    dump.set_defaults(handler=_dump_state)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args)
    except ConfigurationError as exc:
        logger.error("configuration error: %s", exc)
        return 2
    except SignalDQNError as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
