"""PNG figures for the learning curve and the controller comparison. Needs the ``plot`` extra."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING

from ._dqn import DaySummary, Stage

if TYPE_CHECKING:
    from ._harness import Comparison

logger = logging.getLogger(__name__)


def _pyplot():  # pyright: ignore[reportUnknownParameterType]
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("plots need matplotlib: pip install 'signal-dqn[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_learning_curves(curves: Mapping[int, Sequence[DaySummary]], path: Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for size, days in sorted(curves.items(), reverse=True):
        hours = [d.total_travel_time_s / 3600 for d in days]
        ax.plot([d.day + 1 for d in days], hours, marker="o", label=f"{size}x{size}")
    first = next(iter(curves.values()), ())
    for d in first:
        if d.stage is not Stage.TRAIN:
            ax.axvspan(d.day + 0.5, d.day + 1.5, color="0.9", zorder=0)
    ax.set_xlabel("simulated day")
    ax.set_ylabel("total travel time (veh-h)")
    ax.set_title("Total travel time per training day")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_delay_bins(comparison: Comparison, path: Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(10, 4.5))
    for name in comparison.logs:
        bins = [b for b in comparison.bins if b.controller == name]
        ax.step([b.bin_start_s / 3600 for b in bins], [b.mean_delay_s for b in bins], where="post", label=name)
    if comparison.scenario is not None:
        for start, end in comparison.scenario.windows:
            ax.axvspan(start / 3600, end / 3600, color="tab:red", alpha=0.15, zorder=0)
    ax.set_xlabel("hour of day")
    ax.set_ylabel("mean delay (s)")
    ax.set_xlim(0, 24)
    ax.set_title("Average delay by 15-minute bin")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_scenario_delay(comparison: Comparison, path: Path) -> Path:
    plt = _pyplot()
    names = [s.controller for s in comparison.summaries]
    values = [s.scenario_mean_delay_s or 0.0 for s in comparison.summaries]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, values, color=["tab:blue", "tab:orange", "tab:green"][: len(names)])
    ax.set_ylabel("mean delay in scenario window (s)")
    ax.set_title("Delay during the volume surge")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_plots(
    out_dir: Path,
    *,
    curves: Mapping[int, Sequence[DaySummary]] | None = None,
    comparison: Comparison | None = None,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    if curves:
        paths.append(plot_learning_curves(curves, out_dir / "learning_curve.png"))
    if comparison is not None:
        paths.append(plot_delay_bins(comparison, out_dir / "delay_bins.png"))
        if comparison.scenario is not None:
            paths.append(plot_scenario_delay(comparison, out_dir / "scenario_delay.png"))
    for path in paths:
        logger.info("wrote %s", path)
    return paths
