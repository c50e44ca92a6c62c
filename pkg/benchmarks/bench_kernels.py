"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--threads N]

Times one objective+gradient evaluation at several tensor sizes, conflict
binning of a long event stream, and a short full solve.
"""

import argparse
import time

import numpy as np

from evfuse import _fallback, kernels
from evfuse.solver import SolverConfig, solve
from evfuse.synthetic import random_config, random_problem

try:
    from evfuse import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def row(label, t_py, t_c):
    speed = f"{t_py / t_c:6.1f}x" if t_c else "     -"
    c = f"{t_c * 1e3:10.2f}" if t_c else "         -"
    print(f"{label:34s} {t_py * 1e3:10.2f} {c} {speed}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=None, help="default: EVFUSE_THREADS or all cores")
    args = ap.parse_args()
    nthreads = args.threads or kernels.thread_count()
    print(f"compiled kernels: {'yes' if _kernels else 'no'}; threads: {nthreads}")
    print(f"{'':34s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>7s}")

    rng = np.random.default_rng(0)
    for shape in ((9, 64, 64), (21, 128, 128), (21, 256, 256)):
        for case, mode in (("interpolation", "ternary"), ("deblur", "stacked")):
            p, _ = random_problem(rng, shape, case, mode)
            cfg = random_config(rng)
            H = rng.random(shape)
            a = (H, p.observation.frames, p.case.code, p.event_values, p.group_bounds,
                 cfg.alpha, cfg.lambda_e, cfg.lambda_xy, cfg.lambda_t, True)
            t_py = best_of(lambda: _fallback.dmr_terms(*a), args.repeat)
            t_c = best_of(lambda: _kernels.dmr_terms(*a, nthreads), args.repeat) if _kernels else 0
            row(f"objective+grad {case[:6]} {mode[:4]} {shape[0]}x{shape[1]}x{shape[2]}", t_py, t_c)

    n = 200_000
    x, y = rng.integers(0, 240, n), rng.integers(0, 180, n)
    t_py = best_of(lambda: _fallback.conflict_frame_index(x, y, 240, 180), 1)
    t_c = best_of(lambda: _kernels.conflict_frame_index(x, y, 240, 180), args.repeat) if _kernels else 0
    row(f"conflict binning {n} events", t_py, t_c)

    p, _ = random_problem(rng, (9, 64, 64))
    cfg = SolverConfig(epochs=100)
    saved = kernels._backend
    try:
        kernels._backend = _fallback
        t_py = best_of(lambda: solve(p, cfg), args.repeat)
        t_c = 0
        if _kernels:
            kernels._backend = _kernels
            t_c = best_of(lambda: solve(p, cfg), args.repeat)
    finally:
        kernels._backend = saved
    row("solve 100 epochs 9x64x64", t_py, t_c)


if __name__ == "__main__":
    main()
