# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels for the built-in vector fields.

Mirrors ``_kernels_py`` function for function; the two must agree to
rounding.  ``code`` selects the field: 0 bioreactor, 1 diagonal linear.
Non-finite values are propagated, the Python wrappers check them.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef inline void _field(int code, const double* p, const double* y, const double* u,
                        const double* w, double* out, Py_ssize_t n) noexcept nogil:
    cdef double mu, X, S, P
    cdef Py_ssize_t i
    if code == 0:
        # p = D, K_i, K_m, P_m, Y_xs, alpha, beta, mu_m
        X = y[0]
        S = y[1]
        P = y[2]
        mu = p[7] * (1.0 - P / p[3]) * S / (p[2] + S + S * S / p[1])
        out[0] = -p[0] * X + mu * X
        out[1] = p[0] * (u[0] - S) - mu * X / p[4]
        out[2] = -p[0] * P + (p[5] * mu + p[6]) * X
    else:
        for i in range(n):
            out[i] = p[i] * y[i] + u[i]
    if w != NULL:
        for i in range(n):
            out[i] = out[i] + w[i]


def euler_rollout(int code, double[::1] params, double[:, ::1] y0, double[:, ::1] u_steps,
                  double dt, w=None):
    cdef Py_ssize_t B = y0.shape[0], n = y0.shape[1], N = u_steps.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.empty((B, N + 1, n))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] wv
    cdef bint has_w = w is not None
    if has_w:
        wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double* f = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t b, j, i
    cdef const double* wp
    try:
        with nogil:
            for b in range(B):
                for i in range(n):
                    out[b, 0, i] = y0[b, i]
                for j in range(N):
                    wp = &wv[b, j, 0] if has_w else NULL
                    _field(code, &params[0], &out[b, j, 0], &u_steps[j, 0], wp, f, n)
                    for i in range(n):
                        out[b, j + 1, i] = out[b, j, i] + dt * f[i]
    finally:
        free(f)
    return out_arr


def rk4_rollout(int code, double[::1] params, double[:, ::1] y0, double[:, ::1] u_steps,
                double dt, int refinement, w=None):
    cdef Py_ssize_t B = y0.shape[0], n = y0.shape[1], N = u_steps.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.empty((B, N + 1, n))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] wv
    cdef bint has_w = w is not None
    if has_w:
        wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double h = dt / refinement
    cdef double* buf = <double*> malloc(6 * n * sizeof(double))
    cdef double* y = buf
    cdef double* k1 = buf + n
    cdef double* k2 = buf + 2 * n
    cdef double* k3 = buf + 3 * n
    cdef double* k4 = buf + 4 * n
    cdef double* tmp = buf + 5 * n
    cdef Py_ssize_t b, j, r, i
    cdef const double* wp
    cdef const double* up
    cdef const double* p = &params[0]
    try:
        with nogil:
            for b in range(B):
                for i in range(n):
                    y[i] = y0[b, i]
                    out[b, 0, i] = y[i]
                for j in range(N):
                    wp = &wv[b, j, 0] if has_w else NULL
                    up = &u_steps[j, 0]
                    for r in range(refinement):
                        _field(code, p, y, up, wp, k1, n)
                        for i in range(n):
                            tmp[i] = y[i] + 0.5 * h * k1[i]
                        _field(code, p, tmp, up, wp, k2, n)
                        for i in range(n):
                            tmp[i] = y[i] + 0.5 * h * k2[i]
                        _field(code, p, tmp, up, wp, k3, n)
                        for i in range(n):
                            tmp[i] = y[i] + h * k3[i]
                        _field(code, p, tmp, up, wp, k4, n)
                        for i in range(n):
                            y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    for i in range(n):
                        out[b, j + 1, i] = y[i]
    finally:
        free(buf)
    return out_arr


def euler_transitions(int code, double[::1] params, double[:, ::1] y0, double[:, ::1] modes,
                      int steps, double dt, double[::1] weights):
    """Endpoints and left-rectangle integrals of ``weights . y`` after ``steps`` Euler steps.

    Every start row is paired with every mode row.
    """
    cdef Py_ssize_t B = y0.shape[0], n = y0.shape[1], M = modes.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] end_arr = np.empty((B, M, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] int_arr = np.empty((B, M))
    cdef double[:, :, ::1] end = end_arr
    cdef double[:, ::1] integ = int_arr
    cdef double* buf = <double*> malloc(2 * n * sizeof(double))
    cdef double* y = buf
    cdef double* f = buf + n
    cdef double acc, g
    cdef Py_ssize_t b, m, j, i
    try:
        with nogil:
            for b in range(B):
                for m in range(M):
                    for i in range(n):
                        y[i] = y0[b, i]
                    acc = 0.0
                    for j in range(steps):
                        g = 0.0
                        for i in range(n):
                            g = g + weights[i] * y[i]
                        acc = acc + g * dt
                        _field(code, &params[0], y, &modes[m, 0], NULL, f, n)
                        for i in range(n):
                            y[i] = y[i] + dt * f[i]
                    for i in range(n):
                        end[b, m, i] = y[i]
                    integ[b, m] = acc
    finally:
        free(buf)
    return end_arr, int_arr
