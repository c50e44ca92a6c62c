"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``EVFUSE_PURE_PYTHON=1``
to force the numpy fallback.  ``EVFUSE_THREADS`` caps the worker count of
the compiled kernels (results are identical for any thread count).
"""

import os

from . import _fallback

INTERPOLATION = _fallback.INTERPOLATION
PREDICTION = _fallback.PREDICTION
DEBLUR = _fallback.DEBLUR

_backend = _fallback
BACKEND = "python"
if os.environ.get("EVFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _backend  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _fallback


def thread_count():
    raw = os.environ.get("EVFUSE_THREADS", "")
    cap = os.cpu_count() or 1
    if not raw:
        return cap
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, cap))


def conflict_frame_index(x, y, width, height):
    return _backend.conflict_frame_index(x, y, width, height)


def dmr_terms(H, obs, case, E, bounds, alpha, lam_e, lam_xy, lam_t, want_grad=True, nthreads=None):
    return _backend.dmr_terms(H, obs, case, E, bounds, alpha, lam_e, lam_xy, lam_t,
                              want_grad, thread_count() if nthreads is None else nthreads)
