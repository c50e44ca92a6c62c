"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or disabled
with ``EVFUSE_PURE_PYTHON=1``.  Signatures match ``_kernels.pyx`` exactly.
"""

import numpy as np

INTERPOLATION, PREDICTION, DEBLUR = 0, 1, 2


def conflict_frame_index(x, y, width, height):
    """Frame index of every event under occupancy-conflict binning.

    Returns ``(index, num_frames)``.
    """
    n = len(x)
    index = np.empty(n, dtype=np.int64)
    owner = np.full((height, width), -1, dtype=np.int64)
    cur = 0
    for i, (xi, yi) in enumerate(zip(x.tolist(), y.tolist())):
        if owner[yi, xi] == cur:
            cur += 1
        owner[yi, xi] = cur
        index[i] = cur
    return index, (cur + 1 if n else 0)


def tv_differences(H):
    """Forward differences ``(dH/dx + dH/dy, dH/dt)``, zero at the far edges."""
    dx = np.zeros_like(H)
    dx[:, :, :-1] = H[:, :, 1:] - H[:, :, :-1]
    dy = np.zeros_like(H)
    dy[:, :-1, :] = H[:, 1:, :] - H[:, :-1, :]
    dt = np.zeros_like(H)
    dt[:-1] = H[1:] - H[:-1]
    return dx + dy, dt


def dmr_terms(H, obs, case, E, bounds, alpha, lam_e, lam_xy, lam_t, want_grad=True, nthreads=1):
    """Unweighted loss terms and the gradient of the weighted objective.

    Returns ``(l_f, l_e, l_xy, l_t, grad)`` where the objective is
    ``l_f + lam_e*l_e + lam_xy*l_xy + lam_t*l_t`` and ``grad`` is ``None``
    unless requested.  ``bounds`` are cumulative transition offsets of the
    event groups.
    """
    d = H.shape[0]
    if case == INTERPOLATION:
        A = H[[0, d - 1]]
    elif case == PREDICTION:
        A = H[:1]
    else:
        A = H.mean(axis=0, keepdims=True)
    r_f = obs - A
    l_f = np.abs(r_f).mean()

    u = np.tanh(alpha * np.diff(H, axis=0))
    B = np.add.reduceat(u, bounds[:-1], axis=0)
    r_e = E - B
    l_e = np.abs(r_e).mean()

    s_xy, dt = tv_differences(H)
    l_xy = np.abs(s_xy).mean()
    l_t = np.abs(dt).mean()
    if not want_grad:
        return l_f, l_e, l_xy, l_t, None

    g = np.zeros_like(H)
    sf = np.sign(r_f) / r_f.size
    if case == INTERPOLATION:
        g[0] -= sf[0]
        g[d - 1] -= sf[1]
    elif case == PREDICTION:
        g[0] -= sf[0]
    else:
        g -= sf[0] / d

    se = np.repeat(np.sign(r_e), np.diff(bounds), axis=0)
    c = (-lam_e * alpha / r_e.size) * se * (1.0 - u * u)
    g[1:] += c
    g[:-1] -= c

    sxy = (lam_xy / H.size) * np.sign(s_xy)
    g[:, :, 1:] += sxy[:, :, :-1]
    g[:, :, :-1] -= sxy[:, :, :-1]
    g[:, 1:, :] += sxy[:, :-1, :]
    g[:, :-1, :] -= sxy[:, :-1, :]

    st = (lam_t / H.size) * np.sign(dt[:-1])
    g[1:] += st
    g[:-1] -= st
    return l_f, l_e, l_xy, l_t, g
