# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics.

Parallel loops run over whole frames.  Every reduction is accumulated per
frame in a fixed order and the per-frame partials are summed serially, so
results do not depend on the thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs

cnp.import_array()

cdef enum:
    INTERPOLATION = 0
    PREDICTION = 1
    DEBLUR = 2


cdef inline double _sign(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


def conflict_frame_index(x, y, Py_ssize_t width, Py_ssize_t height):
    cdef const cnp.int64_t[::1] xv = np.ascontiguousarray(x, dtype=np.int64)
    cdef const cnp.int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0]
    index_arr = np.empty(n, dtype=np.int64)
    owner_arr = np.full((height, width), -1, dtype=np.int64)
    cdef cnp.int64_t[::1] index = index_arr
    cdef cnp.int64_t[:, ::1] owner = owner_arr
    cdef cnp.int64_t cur = 0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            if owner[yv[i], xv[i]] == cur:
                cur += 1
            owner[yv[i], xv[i]] = cur
            index[i] = cur
    return index_arr, (cur + 1 if n else 0)


def dmr_terms(H, obs, int case, E, bounds, double alpha, double lam_e, double lam_xy,
              double lam_t, bint want_grad=True, int nthreads=1):
    cdef const double[:, :, ::1] h = np.ascontiguousarray(H, dtype=np.float64)
    cdef const double[:, :, ::1] f = np.ascontiguousarray(obs, dtype=np.float64)
    cdef const double[:, :, ::1] e = np.ascontiguousarray(E, dtype=np.float64)
    cdef const cnp.int64_t[::1] gb = np.ascontiguousarray(bounds, dtype=np.int64)
    cdef Py_ssize_t d = h.shape[0], rows = h.shape[1], cols = h.shape[2]
    cdef Py_ssize_t nf = f.shape[0], ng = e.shape[0], nt = d - 1
    cdef int nth = nthreads if nthreads > 0 else 1

    # numpy's vectorised tanh beats a scalar libm loop and matches the fallback bit for bit
    u_arr = np.tanh(alpha * np.diff(h, axis=0))
    se_arr = np.empty((ng, rows, cols))
    sf_arr = np.empty((nf, rows, cols))
    sxy_arr = np.empty((d, rows, cols))
    gid_arr = np.empty(nt, dtype=np.int64)
    pt_arr = np.zeros(d)
    pe_arr = np.zeros(ng)
    pxy_arr = np.zeros(d)
    pf_arr = np.zeros(nf)
    cdef double[:, :, ::1] u = u_arr
    cdef double[:, :, ::1] se = se_arr
    cdef double[:, :, ::1] sf = sf_arr
    cdef double[:, :, ::1] sxy = sxy_arr
    cdef cnp.int64_t[::1] gid = gid_arr
    cdef double[::1] pt = pt_arr
    cdef double[::1] pe = pe_arr
    cdef double[::1] pxy = pxy_arr
    cdef double[::1] pf = pf_arr

    cdef Py_ssize_t t, g, k, i, j, src
    cdef double acc, v, s, a, inv_d = 1.0 / d
    for g in range(ng):
        for t in range(gb[g], gb[g + 1]):
            gid[t] = g

    with nogil:
        # temporal differences, one frame per iteration
        for t in prange(nt, num_threads=nth, schedule="static"):
            acc = 0.0
            for i in range(rows):
                for j in range(cols):
                    acc = acc + fabs(h[t + 1, i, j] - h[t, i, j])
            pt[t] = acc

        # grouped event residuals
        for g in prange(ng, num_threads=nth, schedule="static"):
            acc = 0.0
            for i in range(rows):
                for j in range(cols):
                    s = 0.0
                    for t in range(gb[g], gb[g + 1]):
                        s = s + u[t, i, j]
                    v = e[g, i, j] - s
                    se[g, i, j] = _sign(v)
                    acc = acc + fabs(v)
            pe[g] = acc

        # intensity residuals
        for k in range(nf):
            acc = 0.0
            if case == INTERPOLATION:
                src = 0 if k == 0 else d - 1
            else:
                src = 0
            for i in range(rows):
                for j in range(cols):
                    if case == DEBLUR:
                        a = 0.0
                        for t in range(d):
                            a = a + h[t, i, j]
                        a = a * inv_d
                    else:
                        a = h[src, i, j]
                    v = f[k, i, j] - a
                    sf[k, i, j] = _sign(v)
                    acc = acc + fabs(v)
            pf[k] = acc

        # spatial TV
        for t in prange(d, num_threads=nth, schedule="static"):
            acc = 0.0
            for i in range(rows):
                for j in range(cols):
                    v = 0.0
                    if j + 1 < cols:
                        v = v + h[t, i, j + 1] - h[t, i, j]
                    if i + 1 < rows:
                        v = v + h[t, i + 1, j] - h[t, i, j]
                    sxy[t, i, j] = _sign(v)
                    acc = acc + fabs(v)
            pxy[t] = acc

    cdef double n_h = <double>(d * rows * cols)
    cdef double l_f = 0.0, l_e = 0.0, l_xy = 0.0, l_t = 0.0
    for k in range(nf):
        l_f += pf[k]
    for g in range(ng):
        l_e += pe[g]
    for t in range(d):
        l_xy += pxy[t]
        l_t += pt[t]
    l_f /= nf * rows * cols
    l_e /= ng * rows * cols
    l_xy /= n_h
    l_t /= n_h
    if not want_grad:
        return l_f, l_e, l_xy, l_t, None

    grad_arr = np.empty((d, rows, cols))
    cdef double[:, :, ::1] gr = grad_arr
    cdef double wf = 1.0 / (nf * rows * cols)
    cdef double we = -lam_e * alpha / (ng * rows * cols)
    cdef double wxy = lam_xy / n_h
    cdef double wt = lam_t / n_h
    cdef double c
    with nogil:
        for t in prange(d, num_threads=nth, schedule="static"):
            for i in range(rows):
                for j in range(cols):
                    v = 0.0
                    # intensity adjoint
                    if case == DEBLUR:
                        v = v - sf[0, i, j] * wf * inv_d
                    elif t == 0:
                        v = v - sf[0, i, j] * wf
                    elif case == INTERPOLATION and t == d - 1:
                        v = v - sf[1, i, j] * wf
                    # event chain rule through tanh
                    if t > 0:
                        a = u[t - 1, i, j]
                        c = we * se[gid[t - 1], i, j] * (1.0 - a * a)
                        v = v + c
                        v = v + wt * _sign(h[t, i, j] - h[t - 1, i, j])
                    if t < d - 1:
                        a = u[t, i, j]
                        c = we * se[gid[t], i, j] * (1.0 - a * a)
                        v = v - c
                        v = v - wt * _sign(h[t + 1, i, j] - h[t, i, j])
                    # spatial TV adjoint
                    if j > 0:
                        v = v + wxy * sxy[t, i, j - 1]
                    if j + 1 < cols:
                        v = v - wxy * sxy[t, i, j]
                    if i > 0:
                        v = v + wxy * sxy[t, i - 1, j]
                    if i + 1 < rows:
                        v = v - wxy * sxy[t, i, j]
                    gr[t, i, j] = v
    return l_f, l_e, l_xy, l_t, grad_arr
