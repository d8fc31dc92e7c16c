# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the soft histogram and the rational tone curve.

Same contracts as numpy_backend, with the per-row loops fused so no
(N, P, K) temporaries are materialized. All accumulation is sequential
left-to-right, so results are bitwise reproducible run to run.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

NAME = "cython"


def hist_forward(const double[:, ::1] x, const double[::1] centers, double gamma):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, m
    cdef double v, diff
    cdef double inv_gamma = 1.0 / gamma
    cdef double inv_p = 1.0 / p
    with nogil:
        for i in range(n):
            for j in range(p):
                v = x[i, j]
                for m in range(k):
                    diff = v - centers[m]
                    out[i, m] += exp(-diff * diff * inv_gamma)
            for m in range(k):
                out[i, m] *= inv_p
    return out_arr


def hist_backward(const double[:, ::1] x, const double[::1] centers, double gamma,
                  const double[:, ::1] gout):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    gx_arr = np.empty((n, p), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t i, j, m
    cdef double v, diff, acc
    cdef double inv_gamma = 1.0 / gamma
    cdef double scale
    scale = -2.0 / (gamma * p)
    with nogil:
        for i in range(n):
            for j in range(p):
                v = x[i, j]
                acc = 0.0
                for m in range(k):
                    diff = v - centers[m]
                    acc += gout[i, m] * diff * exp(-diff * diff * inv_gamma)
                gx[i, j] = acc * scale
    return gx_arr


def curve_forward(const double[:, ::1] x, const double[::1] a, const double[::1] b,
                  const double[::1] d, const double[::1] e):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    y_arr = np.empty((n, p), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t i, j
    cdef double ai, bi, di, ei, v, xx
    with nogil:
        for i in range(n):
            ai = a[i]; bi = b[i]; di = d[i]; ei = e[i]
            for j in range(p):
                v = x[i, j]
                xx = v * v
                y[i, j] = (ai * xx + bi * v) / (di * xx + ei * v + 1.0)
    return y_arr


def curve_backward(const double[:, ::1] x, const double[::1] a, const double[::1] b,
                   const double[::1] d, const double[::1] e, const double[:, ::1] gy):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    gx_arr = np.empty((n, p), dtype=np.float64)
    ga_arr = np.zeros(n, dtype=np.float64)
    gb_arr = np.zeros(n, dtype=np.float64)
    gd_arr = np.zeros(n, dtype=np.float64)
    ge_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[::1] ga = ga_arr
    cdef double[::1] gb = gb_arr
    cdef double[::1] gd = gd_arr
    cdef double[::1] ge = ge_arr
    cdef Py_ssize_t i, j
    cdef double ai, bi, di, ei, v, xx, den, yv, g
    with nogil:
        for i in range(n):
            ai = a[i]; bi = b[i]; di = d[i]; ei = e[i]
            for j in range(p):
                v = x[i, j]
                xx = v * v
                den = di * xx + ei * v + 1.0
                yv = (ai * xx + bi * v) / den
                g = gy[i, j] / den
                gx[i, j] = g * ((2.0 * ai * v + bi) - yv * (2.0 * di * v + ei))
                ga[i] += g * xx
                gb[i] += g * v
                gd[i] -= g * yv * xx
                ge[i] -= g * yv * v
    return gx_arr, ga_arr, gb_arr, gd_arr, ge_arr
