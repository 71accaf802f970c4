# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel inner loops.

Mirror of h2nmf._kernels_py; see that module for the contract.  The branch
logic must stay in lockstep with the fallback so the two backends agree.
"""

from libc.math cimport sqrt

import numpy as np


def resolve_nnls2(double q11, double q12, double q22, double[:, ::1] C):
    cdef Py_ssize_t n = C.shape[1]
    cdef Py_ssize_t j
    out_arr = np.zeros((2, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double det = q11 * q22 - q12 * q12
    cdef bint regular = det > 1e-13 * q11 * q22 and det > 0.0
    cdef double c1, c2, x1, x2, y2, z1, fy, fz
    for j in range(n):
        c1 = C[0, j]
        c2 = C[1, j]
        if regular:
            x1 = (q22 * c1 - q12 * c2) / det
            x2 = (q11 * c2 - q12 * c1) / det
            if x1 >= 0.0 and x2 >= 0.0:
                out[0, j] = x1
                out[1, j] = x2
                continue
        y2 = c2 / q22 if q22 > 0.0 else 0.0
        if y2 < 0.0:
            y2 = 0.0
        z1 = c1 / q11 if q11 > 0.0 else 0.0
        if z1 < 0.0:
            z1 = 0.0
        fy = y2 * (q22 * y2 - 2.0 * c2)
        fz = z1 * (q11 * z1 - 2.0 * c1)
        if fy <= fz:
            out[1, j] = y2
        else:
            out[0, j] = z1
    return out_arr


def spa_select(double[:, ::1] X, Py_ssize_t r):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t i, j, t, k
    R_arr = np.array(X, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] R = R_arr
    norms_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] norms = norms_arr
    chosen_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] chosen = chosen_arr
    sel_arr = np.empty(r, dtype=np.int64)
    cdef long long[::1] sel = sel_arr
    u_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double best, nk, dot, acc

    for j in range(n):
        acc = 0.0
        for t in range(m):
            acc += R[t, j] * R[t, j]
        norms[j] = acc

    for i in range(r):
        k = 0
        best = -1.0
        for j in range(n):
            if not chosen[j] and norms[j] > best:
                best = norms[j]
                k = j
        sel[i] = k
        chosen[k] = 1
        nk = norms[k]
        if nk > 0.0:
            nk = sqrt(nk)
            for t in range(m):
                u[t] = R[t, k] / nk
            for j in range(n):
                dot = 0.0
                for t in range(m):
                    dot += u[t] * R[t, j]
                acc = 0.0
                for t in range(m):
                    R[t, j] -= dot * u[t]
                    acc += R[t, j] * R[t, j]
                norms[j] = acc
    return sel_arr
