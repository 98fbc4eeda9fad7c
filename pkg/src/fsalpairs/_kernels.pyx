# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled adaptive stepper for the built-in benchmark right-hand sides.

Mirrors ``fsalpairs.integrate._adaptive_python`` operation for operation;
only the right-hand side is evaluated natively instead of through a
Python callback.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sqrt, pow, isfinite

cnp.import_array()

# keep in sync with problems.NATIVE_CODES
cdef enum:
    A3 = 0
    A4 = 1
    D5 = 2
    PLEI = 3

cdef double[7] PLEI_MASS = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]


cdef inline void rhs(int code, double t, double* x, double* out) noexcept nogil:
    cdef double r2, r3, dx, dy, w, ax, ay
    cdef int i, j
    if code == A3:
        out[0] = x[0] * cos(t)
    elif code == A4:
        out[0] = 0.25 * x[0] * (1.0 - x[0] / 20.0)
    elif code == D5:
        r3 = pow(x[0] * x[0] + x[1] * x[1], 1.5)
        out[0] = x[2]
        out[1] = x[3]
        out[2] = -x[0] / r3
        out[3] = -x[1] / r3
    else:
        for i in range(14):
            out[i] = x[14 + i]
        for i in range(7):
            ax = 0.0
            ay = 0.0
            for j in range(7):
                if j == i:
                    continue
                dx = x[j] - x[i]
                dy = x[7 + j] - x[7 + i]
                r2 = dx * dx + dy * dy
                w = PLEI_MASS[j] / (r2 * sqrt(r2))
                ax = ax + w * dx
                ay = ay + w * dy
            out[14 + i] = ax
            out[21 + i] = ay


def dimension(int code):
    return (1, 1, 4, 28)[code]


def adaptive(int code, double[::1] c, double[:, ::1] A, double[::1] b, double[::1] d,
             bint fsal, double t0, double tend, double[::1] x0, double atol,
             double safety, double exponent, double h0, double clamp_lo, double clamp_hi,
             double hmin, long max_attempts, bint record):
    """Adaptive run; returns ``(status, n_rhs, n_accept, n_reject, t, x, ts, xs)``.

    ``status`` is 0 on success, 1 on step-size underflow, 2 when
    ``max_attempts`` is exhausted and 3 on a non-finite state or error.
    ``clamp_lo <= 0`` disables the growth clamps.
    """
    cdef int s = c.shape[0]
    cdef int n = x0.shape[0]
    cdef cnp.ndarray[double, ndim=2] K_arr = np.zeros((s, n))
    cdef double[:, ::1] K = K_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] xs_stage = np.zeros(n)
    cdef double[::1] xnew = np.zeros(n)
    cdef double[::1] acc = np.zeros(n)
    cdef double t = t0, h = h0, hh, err, eff, fac, sq
    cdef long n_rhs = 0, n_acc = 0, n_rej = 0, attempts = 0
    cdef int i, j, k, status = 0
    cdef bint last, have_f1 = False
    cdef double eps = np.finfo(np.float64).eps
    cdef Py_ssize_t cap = 1024, used = 0
    cdef cnp.ndarray[double, ndim=1] ts_buf
    cdef cnp.ndarray[double, ndim=2] xs_buf
    if record:
        ts_buf = np.empty(cap)
        xs_buf = np.empty((cap, n))
        ts_buf[0] = t
        for k in range(n):
            xs_buf[0, k] = x[k]
        used = 1

    while t < tend:
        if attempts >= max_attempts:
            status = 2
            break
        if not have_f1:
            rhs(code, t, &x[0], &K[0, 0])
            n_rhs += 1
            have_f1 = True
        last = t + h >= tend
        hh = tend - t if last else h
        for i in range(1, s):
            for k in range(n):
                acc[k] = 0.0
            for j in range(i):
                if A[i, j] != 0.0:
                    for k in range(n):
                        acc[k] = acc[k] + A[i, j] * K[j, k]
            for k in range(n):
                xs_stage[k] = x[k] + hh * acc[k]
            rhs(code, t + c[i] * hh, &xs_stage[0], &K[i, 0])
        n_rhs += s - 1
        attempts += 1
        if fsal:
            for k in range(n):
                xnew[k] = xs_stage[k]
        else:
            for k in range(n):
                acc[k] = 0.0
            for j in range(s):
                if b[j] != 0.0:
                    for k in range(n):
                        acc[k] = acc[k] + b[j] * K[j, k]
            for k in range(n):
                xnew[k] = x[k] + hh * acc[k]
        for k in range(n):
            acc[k] = 0.0
        for j in range(s):
            if d[j] != 0.0:
                for k in range(n):
                    acc[k] = acc[k] + d[j] * K[j, k]
        sq = 0.0
        for k in range(n):
            sq = sq + (hh * acc[k]) * (hh * acc[k])
        err = sqrt(sq)
        if not isfinite(err):
            status = 3
            break
        eff = err if err > 0.0 else eps * atol
        fac = safety * pow(atol / eff, exponent)
        if clamp_lo > 0.0:
            fac = min(max(fac, clamp_lo), clamp_hi)
        h = hh * fac
        if err <= atol:
            n_acc += 1
            t = tend if last else t + hh
            for k in range(n):
                x[k] = xnew[k]
            if fsal:
                for k in range(n):
                    K[0, k] = K[s - 1, k]
            else:
                have_f1 = False
            if record:
                if used == cap:
                    cap *= 2
                    ts_buf = np.resize(ts_buf, cap)
                    xs_buf = np.resize(xs_buf, (cap, n))
                ts_buf[used] = t
                for k in range(n):
                    xs_buf[used, k] = x[k]
                used += 1
        else:
            n_rej += 1
        if t < tend and h < hmin:
            status = 1
            break

    x_out = np.asarray(x).copy()
    if record:
        return status, n_rhs, n_acc, n_rej, t, x_out, ts_buf[:used].copy(), xs_buf[:used].copy()
    return status, n_rhs, n_acc, n_rej, t, x_out, None, None
