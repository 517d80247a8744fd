from __future__ import annotations

import numpy as np
import pytest

from signal_dqn import (
    FrameStack,
    Interval,
    RingBarrierPlan,
    RingBarrierState,
    RingState,
    ShapeMismatchError,
    SimClock,
    UnsupportedSizeError,
    encode,
    layout_for,
    pack_matrix,
    push_frame,
    render_ascii,
)
from signal_dqn._encoder import unpack_matrix


def _state(phase1: int = 1, phase2: int = 5, interval: Interval = Interval.GREEN) -> RingBarrierState:
    return RingBarrierState(
        rings=(RingState(phase=phase1, interval=interval), RingState(phase=phase2, interval=interval))
    )


class TestLayout:
    def test_80(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        assert [(b.start, b.width) for b in layout.queue_bands] == [(0, 12), (12, 12), (24, 12), (36, 12)]
        assert sum(b.width for b in layout.signal_bands) == 8
        assert layout.signal_bands[0].start == 48
        assert (layout.time_band.start, layout.time_band.width) == (56, 12)
        assert (layout.day_band.start, layout.day_band.width) == (68, 12)

    @pytest.mark.parametrize("size", [80, 24])
    def test_bands_partition_columns(self, plan: RingBarrierPlan, size: int) -> None:
        covered = [c for band in layout_for(size, plan).bands for c in range(band.start, band.start + band.width)]
        assert covered == list(range(size))
        assert all(band.width >= 1 for band in layout_for(size, plan).bands)

    def test_24_widths(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(24, plan)
        assert [b.width for b in layout.queue_bands] == [3, 3, 3, 3]
        assert (sum(b.width for b in layout.signal_bands), layout.time_band.width, layout.day_band.width) == (4, 4, 4)

    def test_unsupported_size(self, plan: RingBarrierPlan) -> None:
        with pytest.raises(UnsupportedSizeError, match="got 17"):
            layout_for(17, plan)


class TestEncode:
    def test_quiet_monday_midnight(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        matrix = encode((0, 0, 0, 0), _state(), SimClock(0), layout)
        assert not matrix[:, :48].any()
        assert not matrix[:, layout.time_band.columns].any()
        signal = matrix[:, layout.signal_bands[0].columns]
        assert signal[: 80 // 6].all()
        assert not signal[80 // 6 :].any()
        day = matrix[:, layout.day_band.columns]
        assert day[: 80 // 7].all()
        assert not day[80 // 7 :].any()

    def test_queue_thermometer(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        band = encode((7, 0, 0, 0), _state(), SimClock(0), layout)[:, layout.queue_bands[0].columns]
        assert band[-7:].all()
        assert not band[:-7].any()

    def test_queue_saturates(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        over = encode((0, 0, 0, 85), _state(), SimClock(0), layout)
        full = encode((0, 0, 0, 80), _state(), SimClock(0), layout)
        assert np.array_equal(over, full)
        assert over[:, layout.queue_bands[3].columns].all()

    def test_noon(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        band = encode((0, 0, 0, 0), _state(), SimClock(43200), layout)[:, layout.time_band.columns]
        assert band.all(axis=1).sum() == 40
        assert band[40:].all()

    def test_signal_states_are_distinct(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(24, plan)
        seen = {
            encode((0, 0, 0, 0), _state(p1, p2, interval), SimClock(0), layout).tobytes()
            for p1, p2 in ((1, 5), (2, 6))
            for interval in Interval
        }
        assert len(seen) == 6

    def test_weekdays_are_distinct(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(24, plan)
        seen = {encode((0, 0, 0, 0), _state(), SimClock(day * 86400), layout).tobytes() for day in range(7)}
        assert len(seen) == 7

    def test_monotone_in_queue(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(24, plan)
        previous = encode((0, 0, 0, 0), _state(), SimClock(0), layout)
        for q in range(1, 30):
            current = encode((0, q, 0, 0), _state(), SimClock(0), layout)
            assert not (previous & ~current).any()
            previous = current

    def test_random_queues_are_injective_below_saturation(self, plan: RingBarrierPlan) -> None:
        layout = layout_for(80, plan)
        rng = np.random.default_rng(11)
        seen: dict[bytes, tuple[int, ...]] = {}
        for _ in range(10_000):
            queues = tuple(int(q) for q in rng.integers(0, 120, size=4))
            key = pack_matrix(encode(queues, _state(), SimClock(30600), layout)).tobytes()
            clipped = tuple(min(q, 80) for q in queues)
            assert seen.setdefault(key, clipped) == clipped

    def test_wrong_queue_count(self, plan: RingBarrierPlan) -> None:
        with pytest.raises(ShapeMismatchError):
            encode((0, 0, 0), _state(), SimClock(0), layout_for(24, plan))


class TestFrames:
    def test_pack_is_row_major(self) -> None:
        matrix = np.zeros((24, 24), dtype=np.bool_)
        matrix[0, 0] = matrix[0, 9] = True
        packed = pack_matrix(matrix)
        assert packed.shape == (72,)
        assert packed[:2].tolist() == [0b10000000, 0b01000000]
        assert np.array_equal(unpack_matrix(packed, 24), matrix)

    def test_render_ascii(self) -> None:
        matrix = np.array([[True, False], [False, True]])
        assert render_ascii(matrix) == "#.\n.#"

    def test_bootstrap_then_push(self) -> None:
        first = np.zeros((24, 24), dtype=np.bool_)
        new = np.eye(24, dtype=np.bool_)
        stack = push_frame(FrameStack.bootstrap(first), new)
        frames = stack.matrices()
        assert len(frames) == 4
        assert all(np.array_equal(f, first) for f in frames[:3])
        assert np.array_equal(frames[3], new)

    def test_fifo_window(self) -> None:
        frames = [np.full((24, 24), False) for _ in range(5)]
        for i, f in enumerate(frames):
            f[i, i] = True
        stack = FrameStack.bootstrap(frames[0])
        for f in frames[:4]:
            stack = push_frame(stack, f)
        assert [int(np.argmax(m.diagonal())) for m in stack.matrices()] == [0, 1, 2, 3]
        stack = push_frame(stack, frames[4])
        assert [int(np.argmax(m.diagonal())) for m in stack.matrices()] == [1, 2, 3, 4]

    def test_tensor_shape(self) -> None:
        tensor = FrameStack.bootstrap(np.ones((80, 80), dtype=np.bool_)).as_tensor()
        assert tensor.shape == (4, 80, 80)
        assert tensor.dtype == np.float64

    def test_wrong_frame_size(self) -> None:
        with pytest.raises(ShapeMismatchError):
            push_frame(FrameStack.bootstrap(np.zeros((24, 24), dtype=np.bool_)), np.zeros((80, 80), dtype=np.bool_))
