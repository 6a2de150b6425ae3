# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels, mirroring _kernels_py with per-node loops.

The sweep is lexicographic (the natural order for a serial loop); the numpy
twin is red-black. Callers certify results against the residual contract, so
the orderings are interchangeable.
"""

from libc.math cimport fabs

import numpy as np

BACKEND = "cython"


def select_coefficients(double[:, ::1] u, double h,
                        double s1lo, double s1hi, double s2lo, double s2hi,
                        double blo, double bhi,
                        double[:, ::1] sig1, double[:, ::1] sig2,
                        double[:, ::1] b12, signed char[:, ::1] alpha):
    cdef Py_ssize_t m = sig1.shape[0]
    cdef Py_ssize_t p, q, i, j
    cdef double h2 = h * h
    cdef double dxx, dyy, dp, dm
    with nogil:
        for p in range(m):
            i = p + 1
            for q in range(m):
                j = q + 1
                dxx = (u[i + 1, j] - 2.0 * u[i, j] + u[i - 1, j]) / h2
                dyy = (u[i, j + 1] - 2.0 * u[i, j] + u[i, j - 1]) / h2
                dp = (u[i + 1, j + 1] + 2.0 * u[i, j] + u[i - 1, j - 1]
                      - (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1])) / (2.0 * h2)
                dm = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1]
                      - (u[i + 1, j - 1] + 2.0 * u[i, j] + u[i - 1, j + 1])) / (2.0 * h2)
                sig1[p, q] = s1hi if dxx >= 0.0 else s1lo
                sig2[p, q] = s2hi if dyy >= 0.0 else s2lo
                if bhi * dp >= blo * dm:
                    b12[p, q] = bhi
                    alpha[p, q] = 1
                else:
                    b12[p, q] = blo
                    alpha[p, q] = -1


def assemble_stencil(double[:, ::1] sig1, double[:, ::1] sig2,
                     double[:, ::1] b12, signed char[:, ::1] alpha,
                     double dt, double h, double[:, :, ::1] weights):
    cdef Py_ssize_t m = sig1.shape[0]
    cdef Py_ssize_t p, q
    cdef double h2 = h * h
    cdef double inv_dt = 1.0 / dt
    cdef double s1, s2, b, wx, wy
    with nogil:
        for p in range(m):
            for q in range(m):
                s1 = sig1[p, q]
                s2 = sig2[p, q]
                b = b12[p, q]
                if alpha[p, q] > 0:
                    weights[p, q, 0] = inv_dt + (s1 + s2 - b) / h2
                    wx = (b - s1) / (2.0 * h2)
                    wy = (b - s2) / (2.0 * h2)
                    weights[p, q, 5] = -b / (2.0 * h2)
                    weights[p, q, 6] = -b / (2.0 * h2)
                    weights[p, q, 7] = 0.0
                    weights[p, q, 8] = 0.0
                else:
                    weights[p, q, 0] = inv_dt + (s1 + s2 + b) / h2
                    wx = -(s1 + b) / (2.0 * h2)
                    wy = -(s2 + b) / (2.0 * h2)
                    weights[p, q, 5] = 0.0
                    weights[p, q, 6] = 0.0
                    weights[p, q, 7] = b / (2.0 * h2)
                    weights[p, q, 8] = b / (2.0 * h2)
                weights[p, q, 1] = wx
                weights[p, q, 2] = wx
                weights[p, q, 3] = wy
                weights[p, q, 4] = wy


def gs_sweep(double[:, :, ::1] weights, double[:, ::1] rhs, double[:, ::1] u):
    """One lexicographic Gauss-Seidel sweep over the interior of u, in place.

    Returns the largest pre-update row residual seen during the sweep.
    """
    cdef Py_ssize_t m = rhs.shape[0]
    cdef Py_ssize_t p, q, i, j
    cdef double res = 0.0
    cdef double s, r, ar
    with nogil:
        for p in range(m):
            i = p + 1
            for q in range(m):
                j = q + 1
                s = (weights[p, q, 0] * u[i, j]
                     + weights[p, q, 1] * u[i - 1, j]
                     + weights[p, q, 2] * u[i + 1, j]
                     + weights[p, q, 3] * u[i, j - 1]
                     + weights[p, q, 4] * u[i, j + 1]
                     + weights[p, q, 5] * u[i - 1, j - 1]
                     + weights[p, q, 6] * u[i + 1, j + 1]
                     + weights[p, q, 7] * u[i - 1, j + 1]
                     + weights[p, q, 8] * u[i + 1, j - 1])
                r = rhs[p, q] - s
                ar = fabs(r)
                if ar > res:
                    res = ar
                u[i, j] = u[i, j] + r / weights[p, q, 0]
    return res


def apply_stencil(double[:, :, ::1] weights, double[:, ::1] u, double[:, ::1] out):
    """out = A u over interior nodes, reading neighbors from the full level."""
    cdef Py_ssize_t m = out.shape[0]
    cdef Py_ssize_t p, q, i, j
    with nogil:
        for p in range(m):
            i = p + 1
            for q in range(m):
                j = q + 1
                out[p, q] = (weights[p, q, 0] * u[i, j]
                             + weights[p, q, 1] * u[i - 1, j]
                             + weights[p, q, 2] * u[i + 1, j]
                             + weights[p, q, 3] * u[i, j - 1]
                             + weights[p, q, 4] * u[i, j + 1]
                             + weights[p, q, 5] * u[i - 1, j - 1]
                             + weights[p, q, 6] * u[i + 1, j + 1]
                             + weights[p, q, 7] * u[i - 1, j + 1]
                             + weights[p, q, 8] * u[i + 1, j - 1])
