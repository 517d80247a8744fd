"""Bit-matrix state encoding.

Columns are split into bands: one queue thermometer per approach, then the signal state, the time of day and the
day of the week. Row 0 is the top of the matrix; thermometers fill from the bottom row upwards.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ._exceptions import ShapeMismatchError, UnsupportedSizeError
from ._signal import RingBarrierPlan, RingBarrierState
from ._sim import SimClock
from ._types import SECONDS_PER_DAY, Interval

STACK_DEPTH = 4

# size -> (total queue width, signal width, time-of-day width, day-of-week width)
_BAND_WIDTHS: dict[int, tuple[int, int, int, int]] = {80: (48, 8, 12, 12), 24: (12, 4, 4, 4)}

StateMatrix = NDArray[np.bool_]


@dataclass(frozen=True, slots=True, kw_only=True)
class Band:
    name: str
    start: int
    width: int

    @property
    def columns(self) -> slice:
        return slice(self.start, self.start + self.width)


@dataclass(frozen=True, slots=True, kw_only=True)
class EncoderLayout:
    size: int
    queue_bands: tuple[Band, ...]
    signal_bands: tuple[Band, ...]
    time_band: Band
    day_band: Band
    # per ring: (phase id, interval) in row-block order
    signal_blocks: tuple[tuple[tuple[int, Interval], ...], ...]

    @property
    def bands(self) -> tuple[Band, ...]:
        return (*self.queue_bands, *self.signal_bands, self.time_band, self.day_band)


def _block_rows(size: int, index: int, count: int) -> slice:
    return slice(size * index // count, size * (index + 1) // count)


def layout_for(size: int, plan: RingBarrierPlan, n_approaches: int = 4) -> EncoderLayout:
    if size not in _BAND_WIDTHS:
        raise UnsupportedSizeError(f"state matrix size must be 80 or 24, got {size}")
    queue_total, signal_width, time_width, day_width = _BAND_WIDTHS[size]
    if n_approaches < 1 or queue_total % n_approaches:
        raise UnsupportedSizeError(f"{queue_total} queue columns cannot be split across {n_approaches} approaches")
    queue_width = queue_total // n_approaches
    queue_bands = tuple(Band(name=f"queue{a}", start=a * queue_width, width=queue_width) for a in range(n_approaches))

    n_rings = len(plan.rings)
    cursor = queue_total
    signal_bands: list[Band] = []
    for r in range(n_rings):
        width = signal_width // n_rings + (signal_width % n_rings if r == n_rings - 1 else 0)
        signal_bands.append(Band(name=f"signal{r + 1}", start=cursor, width=width))
        cursor += width
    blocks = tuple(tuple((pid, interval) for pid in sequence for interval in Interval) for sequence in plan.rings)
    if any(len(b) > size for b in blocks):
        raise UnsupportedSizeError(f"{max(len(b) for b in blocks)} signal states do not fit in {size} rows")

    time_band = Band(name="time_of_day", start=cursor, width=time_width)
    day_band = Band(name="day_of_week", start=cursor + time_width, width=day_width)
    return EncoderLayout(
        size=size,
        queue_bands=queue_bands,
        signal_bands=tuple(signal_bands),
        time_band=time_band,
        day_band=day_band,
        signal_blocks=blocks,
    )


def encode(queues: Sequence[int], signal: RingBarrierState, clock: SimClock, layout: EncoderLayout) -> StateMatrix:
    size = layout.size
    if len(queues) != len(layout.queue_bands):
        raise ShapeMismatchError(f"expected {len(layout.queue_bands)} queue lengths, got {len(queues)}")
    matrix = np.zeros((size, size), dtype=np.bool_)
    for band, q in zip(layout.queue_bands, queues):
        if q < 0:
            raise ValueError(f"negative queue length {q}")
        filled = min(int(q), size)
        if filled:
            matrix[size - filled :, band.columns] = True

    for band, ring, blocks in zip(layout.signal_bands, signal.rings, layout.signal_blocks):
        index = blocks.index((ring.phase, ring.interval))
        matrix[_block_rows(size, index, len(blocks)), band.columns] = True

    rows = size * clock.second_of_day // SECONDS_PER_DAY
    if rows:
        matrix[size - rows :, layout.time_band.columns] = True
    matrix[_block_rows(size, clock.day_of_week, 7), layout.day_band.columns] = True
    return matrix


# --- Packed frames ---


def pack_matrix(matrix: StateMatrix) -> NDArray[np.uint8]:
    """Row-major packed bitmap, one bit per cell."""
    return np.packbits(matrix.reshape(-1))


def unpack_matrix(packed: NDArray[np.uint8], size: int) -> StateMatrix:
    return np.unpackbits(packed, count=size * size).reshape(size, size).astype(np.bool_)


def render_ascii(matrix: StateMatrix, *, on: str = "#", off: str = ".") -> str:
    return "\n".join("".join(on if cell else off for cell in row) for row in matrix)


@dataclass(frozen=True, slots=True)
class FrameStack:
    """The last four state matrices, oldest first, stored packed."""

    size: int
    frames: tuple[NDArray[np.uint8], ...]

    @classmethod
    def bootstrap(cls, matrix: StateMatrix) -> FrameStack:
        packed = pack_matrix(matrix)
        return cls(matrix.shape[0], (packed,) * STACK_DEPTH)

    def matrices(self) -> list[StateMatrix]:
        return [unpack_matrix(f, self.size) for f in self.frames]

    def as_tensor(self) -> NDArray[np.float64]:
        """Network input of shape (4, size, size)."""
        return np.stack(self.matrices()).astype(np.float64)


def push_frame(stack: FrameStack, matrix: StateMatrix) -> FrameStack:
    if matrix.shape != (stack.size, stack.size):
        raise ShapeMismatchError(f"frame of shape {matrix.shape} pushed onto a {stack.size}x{stack.size} stack")
    return FrameStack(stack.size, (*stack.frames[1:], pack_matrix(matrix)))
