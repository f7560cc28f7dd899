# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-sample kernels. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef long long idx_t


def left_step(const double[:, ::1] V, const double[:, :, ::1] core, const idx_t[::1] col):
    cdef Py_ssize_t m = V.shape[0], ra = core.shape[0], rb = core.shape[2]
    cdef Py_ssize_t s, a, b
    cdef idx_t c
    cdef double v
    out_arr = np.zeros((m, rb))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for s in range(m):
            c = col[s]
            for a in range(ra):
                v = V[s, a]
                if v == 0.0:
                    continue
                for b in range(rb):
                    out[s, b] += v * core[a, c, b]
    return out_arr


def right_step(const double[:, :, ::1] core, const idx_t[::1] col, const double[:, ::1] V):
    cdef Py_ssize_t m = V.shape[0], ra = core.shape[0], rb = core.shape[2]
    cdef Py_ssize_t s, a, b
    cdef idx_t c
    cdef double acc
    out_arr = np.empty((m, ra))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for s in range(m):
            c = col[s]
            for a in range(ra):
                acc = 0.0
                for b in range(rb):
                    acc = acc + core[a, c, b] * V[s, b]
                out[s, a] = acc
    return out_arr


def core_values(const double[:, ::1] L, const double[:, :, ::1] core, const double[:, ::1] R,
                const idx_t[::1] col):
    cdef Py_ssize_t m = L.shape[0], ra = core.shape[0], rb = core.shape[2]
    cdef Py_ssize_t s, a, b
    cdef idx_t c
    cdef double acc, inner
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    with nogil:
        for s in range(m):
            c = col[s]
            acc = 0.0
            for a in range(ra):
                inner = 0.0
                for b in range(rb):
                    inner = inner + core[a, c, b] * R[s, b]
                acc = acc + L[s, a] * inner
            out[s] = acc
    return out_arr


def accumulate_core(const double[:, ::1] L, const double[:, ::1] R, const double[::1] y,
                    const idx_t[::1] col, Py_ssize_t n):
    cdef Py_ssize_t m = L.shape[0], rl = L.shape[1], rr = R.shape[1]
    cdef Py_ssize_t s, a, b
    cdef idx_t c
    cdef double w
    out_arr = np.zeros((rl, n, rr))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for s in range(m):
            c = col[s]
            for a in range(rl):
                w = y[s] * L[s, a]
                for b in range(rr):
                    out[a, c, b] += w * R[s, b]
    return out_arr


def accumulate_pair(const double[:, ::1] L, const double[:, ::1] R, const double[::1] y,
                    const idx_t[::1] col1, const idx_t[::1] col2, Py_ssize_t n1, Py_ssize_t n2):
    cdef Py_ssize_t m = L.shape[0], rl = L.shape[1], rr = R.shape[1]
    cdef Py_ssize_t s, a, b
    cdef idx_t c1, c2
    cdef double w
    out_arr = np.zeros((rl, n1, n2, rr))
    cdef double[:, :, :, ::1] out = out_arr
    with nogil:
        for s in range(m):
            c1 = col1[s]
            c2 = col2[s]
            for a in range(rl):
                w = y[s] * L[s, a]
                for b in range(rr):
                    out[a, c1, c2, b] += w * R[s, b]
    return out_arr
