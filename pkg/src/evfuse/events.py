"""Event firing, event streams and the differentiable tanh event model.

Intensity videos are stored frame-major as ``(d, h, w)`` float arrays with
values in ``[0, 1]``.  Event frames are ``(n, h, w)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    InsufficientFramesError,
    OrderingError,
    ParameterError,
    PartitionError,
    UnsupportedModeError,
)

TERNARY = "ternary"
STACKED = "stacked"
MODES = (TERNARY, STACKED)


@dataclass(frozen=True)
class Event:
    x: int
    y: int
    t: int  # microseconds
    polarity: int


class EventStream:
    """Time-ordered events from a ``width`` x ``height`` sensor.

    Stored column-wise as numpy arrays; iterate to get :class:`Event` records.
    """

    __slots__ = ("width", "height", "x", "y", "t", "p")

    def __init__(self, width, height, x=(), y=(), t=(), p=()):
        self.width = int(width)
        self.height = int(height)
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"sensor size must be positive, got {width}x{height}")
        self.x = np.asarray(x, dtype=np.int64).reshape(-1)
        self.y = np.asarray(y, dtype=np.int64).reshape(-1)
        self.t = np.asarray(t, dtype=np.int64).reshape(-1)
        self.p = np.asarray(p, dtype=np.int8).reshape(-1)
        n = len(self.x)
        if not (len(self.y) == len(self.t) == len(self.p) == n):
            raise DimensionError("event columns have different lengths")
        if n:
            if self.x.min() < 0 or self.x.max() >= self.width:
                raise DomainError("event x coordinate outside the sensor")
            if self.y.min() < 0 or self.y.max() >= self.height:
                raise DomainError("event y coordinate outside the sensor")
            if not np.all((self.p == 1) | (self.p == -1)):
                raise DomainError("event polarity must be +1 or -1")
            if self.t.min() < 0:
                raise DomainError("event timestamps must be non-negative")
            bad = np.flatnonzero(np.diff(self.t) < 0)
            if bad.size:
                raise OrderingError(f"event {bad[0] + 1} is earlier than event {bad[0]}")

    @classmethod
    def from_events(cls, width, height, events: Sequence[Event]) -> "EventStream":
        cols = [[e.x for e in events], [e.y for e in events], [e.t for e in events],
                [e.polarity for e in events]]
        return cls(width, height, *cols)

    def __len__(self):
        return len(self.x)

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in zip(self.x.tolist(), self.y.tolist(), self.t.tolist(), self.p.tolist()):
            yield Event(x, y, t, p)

    def __getitem__(self, i) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and all(np.array_equal(a, b) for a, b in
                        zip((self.x, self.y, self.t, self.p), (other.x, other.y, other.t, other.p))))

    def __repr__(self):
        return f"EventStream({self.width}x{self.height}, {len(self)} events)"

    @property
    def polarity_sum(self) -> int:
        return int(self.p.astype(np.int64).sum())


@dataclass(frozen=True)
class ThresholdParams:
    eps_p: float = 0.02
    eps_n: float = 0.02
    b: float = 1.0 / 255.0

    def __post_init__(self):
        for name in ("eps_p", "eps_n", "b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be a positive finite number, got {v}")


@dataclass
class EventFrameTensor:
    """A stack of event frames.

    ``grouping[g]`` is the number of latent transitions summed into frame ``g``;
    ternary tensors always have singleton groups.  Binned (observed) tensors
    hold integers; tensors produced by :func:`forward_event_model` hold reals.
    """

    frames: np.ndarray
    mode: str = TERNARY
    grouping: tuple = field(default=None)

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3:
            raise DimensionError(f"event frames must be (n, h, w), got shape {self.frames.shape}")
        if self.mode not in MODES:
            raise UnsupportedModeError(f"unknown event frame mode {self.mode!r}")
        n = self.frames.shape[0]
        if self.grouping is None:
            self.grouping = (1,) * n
        self.grouping = tuple(int(g) for g in self.grouping)
        if len(self.grouping) != n or any(g < 1 for g in self.grouping):
            raise PartitionError(f"grouping {self.grouping} does not match {n} frames")
        if self.mode == TERNARY and any(g != 1 for g in self.grouping):
            raise PartitionError("ternary tensors cannot group transitions")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_transitions(self) -> int:
        return sum(self.grouping)

    @property
    def shape(self):
        return self.frames.shape[1:]

    def validate(self):
        """Check the value invariants of observed (binned) event data."""
        f = self.frames
        if self.mode == TERNARY:
            if not np.all(np.isin(f, (-1, 0, 1))):
                raise DomainError("ternary event frames must only hold -1, 0 and +1")
        elif not np.all(np.equal(np.mod(f, 1), 0)):
            raise DomainError("stacked event frames must hold integers")
        return self


def _frames(a) -> np.ndarray:
    return np.asarray(getattr(a, "data", a), dtype=np.float64)


def _ingest(frame) -> np.ndarray:
    a = np.asarray(frame)
    if np.issubdtype(a.dtype, np.integer):
        a = a / 255.0
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise DomainError("intensity frame contains non-finite values")
    return np.clip(a, 0.0, 1.0)


def fire_events(prev_frame, cur_frame, params: ThresholdParams = ThresholdParams()) -> np.ndarray:
    """Ternary event frame fired between two intensity frames (int8, values -1/0/+1)."""
    i0 = _ingest(prev_frame)
    it = _ingest(cur_frame)
    if i0.shape != it.shape:
        raise DimensionError(f"frame shapes differ: {i0.shape} vs {it.shape}")
    theta = np.log(it + params.b) - np.log(i0 + params.b)
    out = np.zeros(theta.shape, dtype=np.int8)
    out[theta > params.eps_p] = 1
    out[theta < -params.eps_n] = -1
    return out


def simulate_stream(video, params: ThresholdParams = ThresholdParams(),
                    frame_period: int = 1000) -> EventStream:
    """Fire events between every pair of consecutive video frames.

    Events of transition ``k -> k+1`` are stamped ``(k+1) * frame_period``
    and ordered row-major within that timestamp.
    """
    v = _frames(video)
    if v.ndim != 3:
        raise DimensionError(f"video must be (d, h, w), got shape {v.shape}")
    d, h, w = v.shape
    if d < 2:
        raise InsufficientFramesError(f"need at least 2 frames to fire events, got {d}")
    if frame_period < 1:
        raise ParameterError("frame_period must be a positive number of microseconds")
    xs, ys, ts, ps = [], [], [], []
    for k in range(d - 1):
        fired = fire_events(v[k], v[k + 1], params)
        yy, xx = np.nonzero(fired)  # row-major order
        xs.append(xx)
        ys.append(yy)
        ts.append(np.full(len(xx), (k + 1) * int(frame_period), dtype=np.int64))
        ps.append(fired[yy, xx])
    return EventStream(w, h, np.concatenate(xs), np.concatenate(ys),
                       np.concatenate(ts), np.concatenate(ps))


def rasterize_by_timestamp(stream: EventStream, frame_period: int, num_transitions: int) -> np.ndarray:
    """Inverse of :func:`simulate_stream`: one ternary frame per transition."""
    out = np.zeros((num_transitions, stream.height, stream.width), dtype=np.int8)
    k = stream.t // int(frame_period) - 1
    if len(k) and (k.min() < 0 or k.max() >= num_transitions or np.any(stream.t % frame_period)):
        raise DomainError("event timestamps do not lie on the frame grid")
    out[k, stream.y, stream.x] = stream.p
    return out


def tanh_event_frame(h_t, h_next, alpha: float) -> np.ndarray:
    a = np.asarray(h_t, dtype=np.float64)
    b = np.asarray(h_next, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    return np.tanh(alpha * (b - a))


def forward_event_model(H, alpha: float, mode: str = TERNARY, grouping=None) -> EventFrameTensor:
    """Predicted event frames of a latent video ``H`` of shape ``(d, h, w)``.

    Ternary mode gives the ``d - 1`` tanh frames; stacked mode sums the tanh
    frames of each consecutive group in ``grouping``.
    """
    v = _frames(H)
    if v.ndim != 3:
        raise DimensionError(f"H must be (d, h, w), got shape {v.shape}")
    if v.shape[0] < 2:
        raise InsufficientFramesError("H needs at least 2 frames")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    tf = np.tanh(alpha * np.diff(v, axis=0))
    if mode == TERNARY:
        return EventFrameTensor(tf, TERNARY)
    if mode != STACKED:
        raise UnsupportedModeError(f"unknown event frame mode {mode!r}")
    grouping = (1,) * tf.shape[0] if grouping is None else tuple(int(g) for g in grouping)
    if any(g < 1 for g in grouping) or sum(grouping) != tf.shape[0]:
        raise PartitionError(f"grouping {grouping} does not partition {tf.shape[0]} transitions")
    bounds = np.cumsum((0,) + grouping)
    out = np.stack([tf[s:e].sum(axis=0) for s, e in zip(bounds[:-1], bounds[1:])])
    return EventFrameTensor(out, STACKED, grouping)


def event_density(frames: EventFrameTensor) -> float:
    if frames.mode != TERNARY:
        raise UnsupportedModeError("event density is only defined for ternary frames")
    f = frames.frames
    if f.size == 0:
        return 0.0
    return float(np.count_nonzero(f)) / f.size
