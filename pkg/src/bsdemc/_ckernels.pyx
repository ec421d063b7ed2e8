# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-path kernels.

Signatures and results mirror :mod:`bsdemc._pykernels`; accumulation runs in
path order so both backends sum in the same sequence.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil

cnp.import_array()


def hc_cells(const double[:, ::1] x, const double[::1] lower, double edge,
             Py_ssize_t per_axis, bint clamp=False):
    cdef Py_ssize_t m, j, n = x.shape[0], d = x.shape[1]
    cdef long long idx, i
    cdef bint inside
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    for m in range(n):
        idx = 0
        inside = True
        for j in range(d):
            i = <long long>ceil((x[m, j] - lower[j]) / edge) - 1
            if clamp:
                if i < 0:
                    i = 0
                elif i >= per_axis:
                    i = per_axis - 1
            elif i < 0 or i >= per_axis:
                inside = False
                break
            idx = idx * per_axis + i
        out[m] = idx if inside else -1
    return out_arr


def nearest_center(const double[:, ::1] x, const double[:, ::1] centers):
    cdef Py_ssize_t m, c, j, n = x.shape[0], nc = centers.shape[0], d = x.shape[1]
    cdef double best, dist, diff
    cdef long long arg
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    for m in range(n):
        best = 1e300
        arg = 0
        for c in range(nc):
            dist = 0.0
            for j in range(d):
                diff = x[m, j] - centers[c, j]
                dist = dist + diff * diff
            if dist < best:
                best = dist
                arg = c
        out[m] = arg
    return out_arr


def cell_gram(const long long[::1] cells, const double[:, ::1] u, Py_ssize_t n_cells):
    cdef Py_ssize_t m, i, j, n = u.shape[0], p = u.shape[1]
    cdef long long c
    gram_arr = np.zeros((n_cells, p, p), dtype=np.float64)
    counts_arr = np.zeros(n_cells, dtype=np.int64)
    cdef double[:, :, ::1] gram = gram_arr
    cdef long long[::1] counts = counts_arr
    for m in range(n):
        c = cells[m]
        if c < 0:
            continue
        counts[c] += 1
        for i in range(p):
            for j in range(i, p):
                gram[c, i, j] += u[m, i] * u[m, j]
    for c in range(n_cells):
        for i in range(p):
            for j in range(i):
                gram[c, i, j] = gram[c, j, i]
    return gram_arr, counts_arr


def cell_cross(const long long[::1] cells, const double[:, ::1] u,
               const double[::1] y, Py_ssize_t n_cells):
    cdef Py_ssize_t m, i, n = u.shape[0], p = u.shape[1]
    cdef long long c
    out_arr = np.zeros((n_cells, p), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for m in range(n):
        c = cells[m]
        if c < 0:
            continue
        for i in range(p):
            out[c, i] += u[m, i] * y[m]
    return out_arr


def cell_dot(const long long[::1] cells, const double[:, ::1] coef,
             const double[:, ::1] u):
    cdef Py_ssize_t m, i, n = u.shape[0], p = u.shape[1]
    cdef long long c
    cdef double acc
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for m in range(n):
        c = cells[m]
        if c < 0:
            continue
        acc = 0.0
        for i in range(p):
            acc = acc + coef[c, i] * u[m, i]
        out[m] = acc
    return out_arr
