"""Differentiable model-based reconstruction (DMR).

Recovers the latent video ``H`` by minimising

    mean|F - A(H)| + lambda_e * mean|E - B(H)|
        + lambda_xy * mean|dH/dx + dH/dy| + lambda_t * mean|dH/dt|

with Adam on closed-form subgradients, projecting onto ``[0, 1]`` after
every step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from ._fallback import tv_differences
from .errors import DimensionError, DivergenceError, ParameterError
from .events import ThresholdParams
from .metrics import video_psnr, video_ssim
from .sensing import FusionProblem, HighResTensor, SensingCase

# recommended sampling ranges; values outside are allowed but flagged
RECOMMENDED_RANGES = {
    "eps_p": (0.0, 0.05),
    "eps_n": (0.0, 0.05),
    "alpha": (8.0, 20.0),
    "lambda_e": (0.1, 0.5),
    "lambda_xy": (0.3, 0.8),
    "lambda_t": (0.2, 0.6),
}


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 10.0
    lambda_e: float = 0.3
    lambda_xy: float = 0.5
    lambda_t: float = 0.4
    lr0: float = 0.002
    lr_drop_factor: float = 0.2
    lr_drop_every: int = 200
    beta1: float = 0.9
    beta2: float = 0.99
    epochs: int = 400
    adam_epsilon: float = 1e-8
    eps_p: float = 0.02
    eps_n: float = 0.02
    b: float = 1.0 / 255.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v}")
        for name in ("lambda_e", "lambda_xy", "lambda_t"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.alpha <= 0:
            raise ParameterError("alpha must be positive")
        if self.lr0 <= 0:
            raise ParameterError("lr0 must be positive")
        if not 0 < self.lr_drop_factor <= 1:
            raise ParameterError("lr_drop_factor must lie in (0, 1]")
        if self.lr_drop_every < 1 or self.epochs < 0:
            raise ParameterError("lr_drop_every must be >= 1 and epochs >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ParameterError("Adam momenta must lie in (0, 1)")
        if self.adam_epsilon <= 0:
            raise ParameterError("adam_epsilon must be positive")
        ThresholdParams(self.eps_p, self.eps_n, self.b)

    @property
    def thresholds(self) -> ThresholdParams:
        return ThresholdParams(self.eps_p, self.eps_n, self.b)

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def out_of_range(self) -> list:
        """Names and values of parameters outside their recommended ranges."""
        out = []
        for name, (lo, hi) in RECOMMENDED_RANGES.items():
            v = getattr(self, name)
            if not lo < v < hi:
                out.append((name, v, (lo, hi)))
        return out

    def as_dict(self):
        return asdict(self)


def learning_rate(cfg: SolverConfig, epoch: int) -> float:
    """Step size used at 1-based ``epoch``."""
    return cfg.lr0 * cfg.lr_drop_factor ** ((epoch - 1) // cfg.lr_drop_every)


class LossTerms(NamedTuple):
    intensity: float  # mean |F - A(H)|
    event: float  # mean |E - B(H)|, unweighted
    tv_xy: float  # unweighted
    tv_t: float

    def pixel(self, cfg):
        return self.intensity + cfg.lambda_e * self.event

    def objective(self, cfg):
        return self.pixel(cfg) + cfg.lambda_xy * self.tv_xy + cfg.lambda_t * self.tv_t


def _data(H, problem: FusionProblem | None = None) -> np.ndarray:
    v = np.asarray(getattr(H, "data", H), dtype=np.float64)
    if v.ndim != 3:
        raise DimensionError(f"H must be (d, h, w), got shape {v.shape}")
    if problem is not None and v.shape != problem.shape:
        raise DimensionError(f"H has shape {v.shape}, problem expects {problem.shape}")
    return v


def _evaluate(H, problem, cfg, want_grad):
    v = _data(H, problem)
    out = kernels.dmr_terms(v, problem.observation.frames, problem.case.code,
                            problem.event_values, problem.group_bounds, cfg.alpha,
                            cfg.lambda_e, cfg.lambda_xy, cfg.lambda_t, want_grad)
    return LossTerms(*(float(x) for x in out[:4])), out[4]


def loss_terms(H, problem: FusionProblem, cfg: SolverConfig) -> LossTerms:
    return _evaluate(H, problem, cfg, False)[0]


def pixel_loss(H, problem: FusionProblem, cfg: SolverConfig) -> float:
    return loss_terms(H, problem, cfg).pixel(cfg)


def tv_loss(H, cfg: SolverConfig) -> float:
    s_xy, dt = tv_differences(_data(H))
    return cfg.lambda_xy * float(np.abs(s_xy).mean()) + cfg.lambda_t * float(np.abs(dt).mean())


def objective(H, problem: FusionProblem, cfg: SolverConfig) -> float:
    return loss_terms(H, problem, cfg).objective(cfg)


def gradient(H, problem: FusionProblem, cfg: SolverConfig) -> np.ndarray:
    """Subgradient of :func:`objective` with respect to every element of ``H`` (sign(0) = 0)."""
    return _evaluate(H, problem, cfg, True)[1]


def l1_arguments(H, problem: FusionProblem, cfg: SolverConfig) -> list:
    """The arrays inside every weighted l1 norm of the objective.

    Their sign pattern identifies the smooth piece the objective is on.
    """
    v = _data(H, problem)
    obs = problem.observation.frames
    case = problem.case
    if case is SensingCase.INTERPOLATION:
        a = v[[0, -1]]
    elif case is SensingCase.PREDICTION:
        a = v[:1]
    else:
        a = v.mean(axis=0, keepdims=True)
    out = [obs - a]
    if cfg.lambda_e:
        u = np.tanh(cfg.alpha * np.diff(v, axis=0))
        out.append(problem.event_values - np.add.reduceat(u, problem.group_bounds[:-1], axis=0))
    s_xy, dt = tv_differences(v)
    if cfg.lambda_xy:
        out.append(s_xy)
    if cfg.lambda_t:
        out.append(dt[:-1])
    return out


def initialize(problem: FusionProblem) -> HighResTensor:
    """Linear blend of the endpoints (interpolation) or copies of the single observed frame."""
    d = problem.d
    obs = problem.observation.frames
    if problem.case is SensingCase.INTERPOLATION:
        k = np.arange(1, d + 1, dtype=np.float64)[:, None, None]
        data = ((d - k) * obs[0] + (k - 1) * obs[1]) / (d - 1)
        data[0], data[-1] = obs[0], obs[1]
    else:
        data = np.repeat(obs[:1], d, axis=0)
    return HighResTensor(np.clip(data, 0.0, 1.0))


class Adam:
    """Bias-corrected Adam on a single array parameter."""

    def __init__(self, shape, beta1=0.9, beta2=0.99, epsilon=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param, grad, lr):
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
        return param


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    pixel_loss: float
    tv_xy: float  # weighted
    tv_t: float  # weighted
    psnr: float | None = None
    ssim: float | None = None


TRACE_COLUMNS = ("epoch", "objective", "pixel_loss", "tv_xy", "tv_t", "psnr", "ssim")


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records], dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow(["" if getattr(r, c) is None else repr(getattr(r, c)) for c in TRACE_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SolveTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_COLUMNS:
            raise ValueError("not a solve trace: unexpected header")
        recs = []
        for row in rows[1:]:
            vals = [None if s == "" else float(s) for s in row[1:]]
            recs.append(EpochRecord(int(row[0]), *vals))
        return cls(recs)


def _record(epoch, terms, cfg, H, ground_truth):
    rec = EpochRecord(epoch, terms.objective(cfg), terms.pixel(cfg),
                      cfg.lambda_xy * terms.tv_xy, cfg.lambda_t * terms.tv_t)
    if ground_truth is not None:
        rec.psnr = video_psnr(H, ground_truth)
        rec.ssim = video_ssim(H, ground_truth)
    return rec


def solve(problem: FusionProblem, cfg: SolverConfig = SolverConfig(), ground_truth=None,
          init=None, callback: Callable[[EpochRecord], None] | None = None):
    """Run ``cfg.epochs`` Adam steps from ``init`` (default :func:`initialize`).

    Returns ``(HighResTensor, SolveTrace)``; each trace record describes the
    iterate after that epoch's step and projection.
    """
    H = np.array(_data(initialize(problem) if init is None else init, problem), dtype=np.float64)
    gt = None
    if ground_truth is not None:
        gt = _data(ground_truth, problem)
    opt = Adam(H.shape, cfg.beta1, cfg.beta2, cfg.adam_epsilon)
    trace = SolveTrace()
    terms, grad = _evaluate(H, problem, cfg, True)
    for epoch in range(1, cfg.epochs + 1):
        opt.step(H, grad, learning_rate(cfg, epoch))
        np.clip(H, 0.0, 1.0, out=H)
        terms, grad = _evaluate(H, problem, cfg, epoch < cfg.epochs)
        value = terms.objective(cfg)
        if not math.isfinite(value):
            raise DivergenceError(epoch, value)
        rec = _record(epoch, terms, cfg, H, gt)
        trace.records.append(rec)
        if callback is not None:
            callback(rec)
    return HighResTensor(H), trace
