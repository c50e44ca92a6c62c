"""Synthetic videos and random problem instances for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .events import TERNARY, STACKED, EventFrameTensor, fire_events, ThresholdParams
from .sensing import HighResTensor, SensingCase, forward_intensity, make_problem
from .solver import RECOMMENDED_RANGES, SolverConfig


def moving_square(size=64, frames=9, side=24, step=2, background=0.2, low=0.45, high=0.95,
                  start=(8, 8), texture="ramp", frame_period=1000) -> HighResTensor:
    """A textured square sliding diagonally by ``step`` pixels per frame over a flat background.

    The texture makes interior pixels change at every frame, so each
    transition shares pixels with its predecessor.  ``texture`` is ``"ramp"``
    (horizontal ``low -> high`` gradient), ``"stripes"`` (vertical bars
    ``step`` wide) or ``"checker"`` (``step``-sized cells).
    """
    yy, xx = np.mgrid[0:side, 0:side]
    if texture == "ramp":
        patch = np.broadcast_to(np.linspace(low, high, side)[None, :], (side, side))
    elif texture == "stripes":
        patch = np.where((xx // step) % 2 == 0, high, low)
    elif texture == "checker":
        patch = np.where(((xx // step) + (yy // step)) % 2 == 0, high, low)
    else:
        raise ValueError(f"unknown texture {texture!r}")
    data = np.full((frames, size, size), background, dtype=np.float64)
    y0, x0 = start
    for k in range(frames):
        y, x = y0 + k * step, x0 + k * step
        if y + side > size or x + side > size:
            raise ValueError("square leaves the frame; reduce step or frames")
        data[k, y:y + side, x:x + side] = patch
    return HighResTensor(data, frame_period)


def random_config(rng: np.random.Generator, **overrides) -> SolverConfig:
    """Solver config with weights drawn uniformly from their recommended ranges."""
    kw = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in RECOMMENDED_RANGES.items()
          if not name.startswith("eps")}
    kw["eps_p"] = kw["eps_n"] = 0.02
    kw.update(overrides)
    return SolverConfig(**kw)


def random_problem(rng: np.random.Generator, shape=(5, 8, 8), case=SensingCase.INTERPOLATION,
                   mode=TERNARY, params=ThresholdParams()):
    """Fusion problem observed from a random ground-truth video.

    Returns ``(problem, ground_truth)``.  In stacked mode the transitions are
    split into two groups.
    """
    gt = rng.uniform(0.05, 0.95, size=shape)
    obs = forward_intensity(gt, case)
    fired = np.stack([fire_events(gt[k], gt[k + 1], params) for k in range(shape[0] - 1)])
    if mode == TERNARY:
        ev = EventFrameTensor(fired, TERNARY)
    else:
        n = shape[0] - 1
        first = max(1, n // 2)
        grouping = (first, n - first) if n > 1 else (1,)
        bounds = np.cumsum((0,) + grouping)
        ev = EventFrameTensor(np.stack([fired[s:e].sum(axis=0) for s, e in zip(bounds[:-1], bounds[1:])]),
                              STACKED, grouping)
    return make_problem(obs, ev, shape[0]), gt
