# cython: language_level=3
"""Compiled hot kernels: renewal-path crossing scan and compensated sums.

Contracts are documented in hotwall._kernels_py (the fallback with the same
API). Here the per-path scan is sequential Kahan summation, which avoids the
fallback's full-block cumsum temporaries.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def cross_scan(double[:, ::1] tau_block, gval_block, double[:] t_target,
               double[:] S, double[:] C, long long[:] N,
               double[:] G, double[:] GC, double[:] tau_next,
               cnp.uint8_t[:] done):
    cdef Py_ssize_t n = tau_block.shape[0]
    cdef Py_ssize_t K = tau_block.shape[1]
    cdef Py_ssize_t i, k
    cdef double tau, y, t, s, c, g, gy, gt
    cdef int remaining = 0
    cdef bint has_g = gval_block is not None
    cdef double[:, ::1] gv
    if has_g:
        gv = gval_block
    for i in range(n):
        if done[i]:
            continue
        s = S[i]
        c = C[i]
        for k in range(K):
            tau = tau_block[i, k]
            if s + tau > t_target[i]:
                tau_next[i] = tau
                done[i] = 1
                break
            # Neumaier-style compensated add: true sum ~ s + c.
            y = tau + c
            t = s + y
            c = y - (t - s)
            s = t
            N[i] += 1
            if has_g:
                g = gv[i, k]
                gy = g + GC[i]
                gt = G[i] + gy
                GC[i] = gy - (gt - G[i])
                G[i] = gt
        S[i] = s
        C[i] = c
        if not done[i]:
            remaining += 1
    return remaining


def kahan_cumsum(double[:] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double s = 0.0, c = 0.0, y, t
    cdef Py_ssize_t i
    for i in range(n):
        y = x[i] + c
        t = s + y
        c = y - (t - s)
        s = t
        out[i] = s
    return out_arr
