"""Intensity sensing models and the fusion problem bundle."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DimensionError, DomainError, InsufficientFramesError
from .events import TERNARY, EventFrameTensor
from . import kernels


class SensingCase(str, enum.Enum):
    INTERPOLATION = "interpolation"
    PREDICTION = "prediction"
    DEBLUR = "deblur"

    @classmethod
    def parse(cls, name) -> "SensingCase":
        if isinstance(name, cls):
            return name
        aliases = {"interpolate": "interpolation", "predict": "prediction"}
        key = str(name).lower()
        return cls(aliases.get(key, key))

    @property
    def num_observed(self) -> int:
        return 2 if self is SensingCase.INTERPOLATION else 1

    @property
    def code(self) -> int:
        return {SensingCase.INTERPOLATION: kernels.INTERPOLATION,
                SensingCase.PREDICTION: kernels.PREDICTION,
                SensingCase.DEBLUR: kernels.DEBLUR}[self]


@dataclass
class HighResTensor:
    """Latent high-framerate video, shape ``(d, h, w)``, values in ``[0, 1]``."""

    data: np.ndarray
    frame_period: int = 1000  # microseconds

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DimensionError(f"tensor must be (d, h, w), got shape {self.data.shape}")
        if self.data.shape[0] < 2:
            raise InsufficientFramesError(f"tensor needs d >= 2 frames, got {self.data.shape[0]}")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("tensor contains non-finite values")
        if self.data.size and (self.data.min() < 0 or self.data.max() > 1):
            raise DomainError("tensor values must lie in [0, 1]")

    @property
    def d(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class Observation:
    case: SensingCase
    frames: np.ndarray  # (1, h, w) or (2, h, w)

    def __post_init__(self):
        case = SensingCase.parse(self.case)
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3 or frames.shape[0] != case.num_observed:
            raise DimensionError(
                f"{case.value} observes {case.num_observed} frame(s), got shape {frames.shape}")
        object.__setattr__(self, "case", case)
        object.__setattr__(self, "frames", frames)

    @property
    def shape(self):
        return self.frames.shape[1:]


def forward_intensity(H, case) -> Observation:
    """Apply the intensity sensing operator of ``case`` to ``H``.

    Interpolation observes the first and last frames, prediction the first,
    deblur the temporal mean.
    """
    case = SensingCase.parse(case)
    v = np.asarray(getattr(H, "data", H), dtype=np.float64)
    if v.ndim != 3:
        raise DimensionError(f"H must be (d, h, w), got shape {v.shape}")
    if case is SensingCase.INTERPOLATION:
        frames = v[[0, -1]].copy()
    elif case is SensingCase.PREDICTION:
        frames = v[:1].copy()
    else:
        frames = v.mean(axis=0, keepdims=True)
    return Observation(case, frames)


@dataclass(frozen=True)
class FusionProblem:
    """Immutable bundle consumed by the solver."""

    observation: Observation
    events: EventFrameTensor
    d: int

    @property
    def case(self) -> SensingCase:
        return self.observation.case

    @property
    def shape(self):
        return (self.d,) + tuple(self.observation.shape)

    @property
    def group_bounds(self) -> np.ndarray:
        return self._bounds

    @property
    def event_values(self) -> np.ndarray:
        return self._event_values


def make_problem(obs: Observation, events: EventFrameTensor, d: int | None = None) -> FusionProblem:
    """Bundle observation and events; ``d`` defaults to one more than the transitions."""
    n = events.num_transitions
    if d is None:
        d = n + 1
    if d < 2:
        raise ConsistencyError(f"target frame count must be at least 2, got {d}")
    if n != d - 1:
        kind = "frames" if events.mode == TERNARY else "grouped transitions"
        raise ConsistencyError(f"{n} event {kind} cannot describe {d} latent frames (need {d - 1})")
    if tuple(events.shape) != tuple(obs.shape):
        raise DimensionError(f"event frames {tuple(events.shape)} vs observation {tuple(obs.shape)}")
    ev = np.array(events.frames, dtype=np.float64)
    ev.setflags(write=False)
    obs.frames.setflags(write=False)
    p = FusionProblem(obs, events, int(d))
    object.__setattr__(p, "_event_values", ev)
    object.__setattr__(p, "_bounds", np.cumsum((0,) + events.grouping).astype(np.int64))
    return p
