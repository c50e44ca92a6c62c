"""Central finite-difference check of the analytic DMR gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import TERNARY
from .sensing import SensingCase
from .solver import gradient, l1_arguments, objective
from .synthetic import random_config, random_problem

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
# denominators never drop below this, so entries whose exact value is 0 compare absolutely
REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int  # coordinates with an l1 kink within one step

    def passed(self, tol=DEFAULT_TOL) -> bool:
        return self.max_rel_error < tol


def _signs(args):
    return [np.sign(a) for a in args]


def check_gradient(H, problem, cfg, step=DEFAULT_STEP, grad=None) -> GradCheckResult:
    """Compare ``grad`` (default: the analytic gradient) with central differences of the objective.

    Coordinates where any l1 argument changes sign within ``+-step`` are skipped.
    """
    H = np.array(getattr(H, "data", H), dtype=np.float64)
    g = gradient(H, problem, cfg) if grad is None else np.asarray(grad)
    center = _signs(l1_arguments(H, problem, cfg))
    worst, checked, skipped = 0.0, 0, 0
    flat = H.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        values, kink = [], False
        for delta in (step, -step):
            flat[i] = orig + delta
            if not kink:
                kink = any(not np.array_equal(np.sign(a), s)
                           for a, s in zip(l1_arguments(H, problem, cfg), center))
            values.append(objective(H, problem, cfg))
        flat[i] = orig
        if kink:
            skipped += 1
            continue
        fd = (values[0] - values[1]) / (2 * step)
        a = g.reshape(-1)[i]
        rel = abs(a - fd) / max(abs(a), abs(fd), REL_FLOOR)
        worst = max(worst, rel)
        checked += 1
    return GradCheckResult(worst, checked, skipped)


def random_gradcheck(seed=0, shape=(5, 8, 8), case=SensingCase.INTERPOLATION, mode=TERNARY,
                     corrupt=False) -> GradCheckResult:
    """Gradient check on a random instance with a random recommended-range config.

    ``corrupt`` perturbs the analytic gradient to exercise the harness itself.
    """
    rng = np.random.default_rng(seed)
    problem, _ = random_problem(rng, shape, SensingCase.parse(case), mode)
    cfg = random_config(rng)
    H = rng.uniform(0.05, 0.95, size=shape)
    grad = None
    if corrupt:
        grad = gradient(H, problem, cfg)
        grad.reshape(-1)[grad.size // 2] += 1e-2
    return check_gradient(H, problem, cfg, grad=grad)
