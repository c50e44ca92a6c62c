"""Turning event streams into event frames.

Two strategies:

* conflict-driven: events stay in the current frame until one lands on an
  already occupied pixel, which opens a new frame.  Frames are ternary.
* stacked: polarities are summed per pixel over equal time windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OrderingError, ParameterError, PartitionError, UnsupportedModeError
from .events import STACKED, TERNARY, EventFrameTensor, EventStream


@dataclass
class BinningResult:
    """Event frames plus the ``(start, end)`` timestamp span of each frame.

    Conflict-driven spans run from the first to the last event of a frame
    (consecutive spans may share a timestamp when events tie).  Stacked spans
    are half-open windows ``[start, end)``; the last one is closed.
    """

    frames: EventFrameTensor
    frame_boundaries: list

    @property
    def num_frames(self):
        return self.frames.num_frames


def _check_sorted(stream):
    bad = np.flatnonzero(np.diff(stream.t) < 0)
    if bad.size:
        raise OrderingError(f"event {bad[0] + 1} is earlier than event {bad[0]}")


def bin_conflict_driven(stream: EventStream) -> BinningResult:
    _check_sorted(stream)
    h, w = stream.height, stream.width
    if len(stream) == 0:
        return BinningResult(EventFrameTensor(np.zeros((0, h, w), np.int8), TERNARY), [])
    index, n = kernels.conflict_frame_index(stream.x, stream.y, w, h)
    frames = np.zeros((n, h, w), dtype=np.int8)
    frames[index, stream.y, stream.x] = stream.p
    # index is non-decreasing, so the first/last event of each frame are at the run edges
    starts = np.searchsorted(index, np.arange(n), side="left")
    ends = np.searchsorted(index, np.arange(n), side="right") - 1
    bounds = [(int(stream.t[s]), int(stream.t[e])) for s, e in zip(starts, ends)]
    return BinningResult(EventFrameTensor(frames, TERNARY), bounds)


def split_evenly(total: int, parts: int) -> tuple:
    """Sizes of ``parts`` consecutive groups covering ``total`` items, larger groups first."""
    if parts < 1 or total < parts:
        raise PartitionError(f"cannot split {total} transitions into {parts} non-empty groups")
    q, r = divmod(total, parts)
    return tuple(q + 1 if i < r else q for i in range(parts))


def bin_stacked(stream: EventStream, num_frames: int, sub_frames: int | None = None) -> BinningResult:
    """Sum polarities over ``num_frames`` equal windows of ``[t_first, t_last]``.

    ``sub_frames`` is the number of latent transitions the stacked frames
    cover (default: one per frame); they are split into consecutive groups
    as evenly as possible.
    """
    if num_frames < 1:
        raise ParameterError(f"num_frames must be at least 1, got {num_frames}")
    _check_sorted(stream)
    grouping = split_evenly(num_frames if sub_frames is None else sub_frames, num_frames)
    h, w = stream.height, stream.width
    frames = np.zeros((num_frames, h, w), dtype=np.int32)
    if len(stream) == 0:
        bounds = [(0, 0)] * num_frames
        return BinningResult(EventFrameTensor(frames, STACKED, grouping), bounds)
    t0, t1 = int(stream.t[0]), int(stream.t[-1])
    span = t1 - t0
    if span == 0:
        window = np.full(len(stream), num_frames - 1, dtype=np.int64)
    else:
        window = np.minimum((stream.t - t0) * num_frames // span, num_frames - 1)
    np.add.at(frames, (window, stream.y, stream.x), stream.p.astype(np.int32))
    # smallest integer timestamp falling in window k is t0 + ceil(k*span/n)
    starts = [t0 + -(-k * span // num_frames) for k in range(num_frames)]
    bounds = [(starts[k], starts[k + 1]) for k in range(num_frames - 1)] + [(starts[-1], t1)]
    return BinningResult(EventFrameTensor(frames, STACKED, grouping), bounds)


def stack_frames(frames: EventFrameTensor, grouping) -> EventFrameTensor:
    """Sum consecutive ternary frames into stacked frames, one per group."""
    if frames.mode != TERNARY:
        raise UnsupportedModeError("only ternary frames can be stacked")
    grouping = tuple(int(g) for g in grouping)
    if any(g < 1 for g in grouping) or sum(grouping) != frames.num_frames:
        raise PartitionError(f"grouping {grouping} does not partition {frames.num_frames} frames")
    f = frames.frames.astype(np.int32)
    if not grouping:
        return EventFrameTensor(f, STACKED, ())
    out = np.add.reduceat(f, np.cumsum((0,) + grouping[:-1]), axis=0)
    return EventFrameTensor(out, STACKED, grouping)


def frames_to_events(frames: EventFrameTensor) -> list:
    """Read ternary frames back as ``(frame, x, y, polarity)`` tuples, row-major per frame."""
    if frames.mode != TERNARY:
        raise UnsupportedModeError("only ternary frames can be read back as events")
    k, y, x = np.nonzero(frames.frames)
    p = frames.frames[k, y, x]
    return list(zip(k.tolist(), x.tolist(), y.tolist(), p.tolist()))
