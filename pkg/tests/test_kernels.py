import os
import subprocess
import sys

import numpy as np
import pytest

from evfuse import _fallback, kernels
from evfuse.solver import SolverConfig, solve
from evfuse.synthetic import random_problem


@pytest.mark.parametrize("raw, expected", [("", None), ("1", 1), ("0", 1), ("-3", 1), ("junk", 1), ("100000", None)])
def test_thread_count(raw, expected, monkeypatch):
    monkeypatch.setenv("EVFUSE_THREADS", raw)
    cap = os.cpu_count() or 1
    assert kernels.thread_count() == (cap if expected is None else min(expected, cap))


def test_pure_python_switch():
    code = "from evfuse import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, EVFUSE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_compiled_backend_selected_when_built():
    pytest.importorskip("evfuse._kernels")
    if os.environ.get("EVFUSE_PURE_PYTHON"):
        pytest.skip("fallback forced by environment")
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("case", ["interpolation", "prediction", "deblur"])
def test_solves_agree_across_backends(case, monkeypatch, rng):
    # Kernel outputs agree to a few ulp, but Adam rescales near-zero
    # subgradients at l1 kinks to full steps, so whole trajectories only
    # agree to optimizer-noise level.
    compiled = pytest.importorskip("evfuse._kernels")
    p, gt = random_problem(rng, (5, 16, 16), case, "stacked")
    cfg = SolverConfig(epochs=40)
    results = []
    for module in (_fallback, compiled):
        monkeypatch.setattr(kernels, "_backend", module)
        results.append(solve(p, cfg, ground_truth=gt))
    (h1, t1), (h2, t2) = results
    assert np.abs(h1.data - h2.data).mean() < 1e-3
    assert np.allclose(t1.column("objective"), t2.column("objective"), rtol=1e-2)


def test_conflict_index_matches_on_large_stream(rng):
    compiled = pytest.importorskip("evfuse._kernels")
    n = 20000
    x, y = rng.integers(0, 32, n), rng.integers(0, 24, n)
    a = _fallback.conflict_frame_index(x, y, 32, 24)
    b = compiled.conflict_frame_index(x, y, 32, 24)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]
