# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched kernels: cyclic Jacobi eigensolver and phase/metric evaluation.

Mirrors ``lagmc._kernels.fallback`` rotation for rotation so both paths agree
to round-off.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, atan, hypot

cnp.import_array()

DEF MAX_SWEEPS = 60
DEF OFF_TOL = 1e-15


cdef void _jacobi_one(double[:, ::1] a, double[:, ::1] v, int n) noexcept nogil:
    cdef int sweep, p, q, k
    cdef double off, fro, apq, theta, t, c, s, x, y

    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)

    for sweep in range(MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = sqrt(2.0 * off)
        if off <= OFF_TOL * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif theta > 0.0:
                    t = 1.0 / (theta + hypot(theta, 1.0))
                else:
                    t = -1.0 / (-theta + hypot(theta, 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * y
                    a[k, q] = s * x + c * y
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * y
                    a[q, k] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * y
                    v[k, q] = s * x + c * y


cdef void _sort_desc(double[::1] vals, double[:, ::1] v, double[::1] tmp,
                     int n) noexcept nogil:
    # insertion sort: stable, n is small
    cdef int i, j, k
    cdef double key
    for i in range(1, n):
        key = vals[i]
        for k in range(n):
            tmp[k] = v[k, i]
        j = i - 1
        while j >= 0 and vals[j] < key:
            vals[j + 1] = vals[j]
            for k in range(n):
                v[k, j + 1] = v[k, j]
            j -= 1
        vals[j + 1] = key
        for k in range(n):
            v[k, j + 1] = tmp[k]


def jacobi_eigh(mats):
    """Eigen-decompose a stack of symmetric matrices (see the fallback docstring)."""
    cdef double[:, :, ::1] a = np.array(mats, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t nb = a.shape[0]
    cdef int n = <int>a.shape[1]
    vals_arr = np.empty((nb, n), dtype=np.float64)
    vecs_arr = np.zeros((nb, n, n), dtype=np.float64)
    cdef double[:, ::1] vals = vals_arr
    cdef double[:, :, ::1] vecs = vecs_arr
    cdef double[::1] tmp = np.empty(max(n, 1), dtype=np.float64)
    cdef Py_ssize_t b
    cdef int i
    with nogil:
        for b in range(nb):
            for i in range(n):
                vecs[b, i, i] = 1.0
            _jacobi_one(a[b], vecs[b], n)
            for i in range(n):
                vals[b, i] = a[b, i, i]
            _sort_desc(vals[b], vecs[b], tmp, n)
    return vals_arr, vecs_arr


def phase_and_inverse_metric(mats):
    """Phase, sorted eigenvalues and ``(I + H^2)^{-1}`` for a stack of Hessians."""
    cdef double[:, :, ::1] a = np.array(mats, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t nb = a.shape[0]
    cdef int n = <int>a.shape[1]
    phase_arr = np.empty(nb, dtype=np.float64)
    vals_arr = np.empty((nb, n), dtype=np.float64)
    ginv_arr = np.zeros((nb, n, n), dtype=np.float64)
    cdef double[::1] phase = phase_arr
    cdef double[:, ::1] vals = vals_arr
    cdef double[:, :, ::1] ginv = ginv_arr
    cdef double[:, ::1] v = np.zeros((max(n, 1), max(n, 1)), dtype=np.float64)
    cdef double[::1] w = np.empty(max(n, 1), dtype=np.float64)
    cdef double[::1] tmp = np.empty(max(n, 1), dtype=np.float64)
    cdef Py_ssize_t b
    cdef int i, j, k
    cdef double acc, lam
    with nogil:
        for b in range(nb):
            for i in range(n):
                for j in range(n):
                    v[i, j] = 1.0 if i == j else 0.0
            _jacobi_one(a[b], v, n)
            for i in range(n):
                vals[b, i] = a[b, i, i]
            _sort_desc(vals[b], v, tmp, n)
            acc = 0.0
            for i in range(n):
                lam = vals[b, i]
                acc += atan(lam)
                w[i] = 1.0 / (1.0 + lam * lam)
            phase[b] = acc
            for i in range(n):
                for j in range(i, n):
                    acc = 0.0
                    for k in range(n):
                        acc += v[i, k] * w[k] * v[j, k]
                    ginv[b, i, j] = acc
                    ginv[b, j, i] = acc
    return phase_arr, vals_arr, ginv_arr
