# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled linear-chain DP kernels; contract documented in _kernels_np.py.

All transition sweeps run row-major over the (L, L) matrix so the inner
loops stream memory; ties in the Viterbi maximization resolve to the lowest
source label (strict improvement, ascending scan).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log

cnp.import_array()


cdef double _lse_row(double[::1] buf, Py_ssize_t n) noexcept:
    cdef Py_ssize_t j
    cdef double peak = buf[0]
    cdef double acc = 0.0
    for j in range(1, n):
        if buf[j] > peak:
            peak = buf[j]
    for j in range(n):
        acc += exp(buf[j] - peak)
    return peak + log(acc)


cdef void _forward_step(double[::1] alpha, double[:, ::1] trans, double omega,
                        double[::1] peak, double[::1] acc, Py_ssize_t n) noexcept:
    # writes logsumexp_a(alpha[a] + omega*trans[a, b]) into peak[b] (two
    # row-major sweeps: max, then exp-accumulate)
    cdef Py_ssize_t a, b
    cdef double va, cand
    for b in range(n):
        peak[b] = -INFINITY
        acc[b] = 0.0
    for a in range(n):
        va = alpha[a]
        for b in range(n):
            cand = va + omega * trans[a, b]
            if cand > peak[b]:
                peak[b] = cand
    for a in range(n):
        va = alpha[a]
        for b in range(n):
            acc[b] += exp(va + omega * trans[a, b] - peak[b])
    for b in range(n):
        peak[b] = peak[b] + log(acc[b])


def log_partition(double[:, ::1] emissions, double[:, ::1] trans,
                  double[::1] start, double[::1] end, double omega):
    cdef Py_ssize_t k = emissions.shape[0]
    cdef Py_ssize_t n = emissions.shape[1]
    cdef cnp.ndarray[double, ndim=1] alpha_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] peak_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] acc_arr = np.empty(n)
    cdef double[::1] alpha = alpha_arr, peak = peak_arr, acc = acc_arr
    cdef Py_ssize_t i, b
    for b in range(n):
        alpha[b] = emissions[0, b] + omega * start[b]
    for i in range(1, k):
        _forward_step(alpha, trans, omega, peak, acc, n)
        for b in range(n):
            alpha[b] = emissions[i, b] + peak[b]
    for b in range(n):
        peak[b] = alpha[b] + omega * end[b]
    return _lse_row(peak, n)


def forward_backward(double[:, ::1] emissions, double[:, ::1] trans,
                     double[::1] start, double[::1] end, double omega):
    cdef Py_ssize_t k = emissions.shape[0]
    cdef Py_ssize_t n = emissions.shape[1]
    cdef cnp.ndarray[double, ndim=2] alphas_arr = np.empty((k, n))
    cdef cnp.ndarray[double, ndim=2] betas_arr = np.empty((k, n))
    cdef cnp.ndarray[double, ndim=2] pos_arr = np.empty((k, n))
    cdef cnp.ndarray[double, ndim=2] pair_arr = np.zeros((n, n))
    cdef cnp.ndarray[double, ndim=1] peak_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] acc_arr = np.empty(n)
    cdef double[:, ::1] alphas = alphas_arr, betas = betas_arr
    cdef double[:, ::1] pos = pos_arr, pair = pair_arr
    cdef double[::1] peak = peak_arr, acc = acc_arr
    cdef Py_ssize_t i, a, b
    cdef double log_z, va

    for b in range(n):
        alphas[0, b] = emissions[0, b] + omega * start[b]
    for i in range(1, k):
        _forward_step(alphas[i - 1], trans, omega, peak, acc, n)
        for b in range(n):
            alphas[i, b] = emissions[i, b] + peak[b]
    for b in range(n):
        peak[b] = alphas[k - 1, b] + omega * end[b]
    log_z = _lse_row(peak, n)

    for a in range(n):
        betas[k - 1, a] = omega * end[a]
    for i in range(k - 2, -1, -1):
        for a in range(n):
            for b in range(n):
                peak[b] = omega * trans[a, b] + emissions[i + 1, b] + betas[i + 1, b]
            betas[i, a] = _lse_row(peak, n)

    for i in range(k):
        for a in range(n):
            pos[i, a] = exp(alphas[i, a] + betas[i, a] - log_z)
    for i in range(k - 1):
        for a in range(n):
            va = alphas[i, a] - log_z
            for b in range(n):
                pair[a, b] += exp(
                    va + omega * trans[a, b] + emissions[i + 1, b] + betas[i + 1, b]
                )
    return log_z, pos_arr, pair_arr


def viterbi(double[:, ::1] emissions, double[:, ::1] trans,
            double[::1] start, double[::1] end, double omega):
    cdef Py_ssize_t k = emissions.shape[0]
    cdef Py_ssize_t n = emissions.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] back_arr = np.zeros((k, n), dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] score_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] best_arr = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path_arr = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] back = back_arr
    cdef double[::1] score = score_arr, best = best_arr
    cdef cnp.int64_t[::1] path = path_arr
    cdef Py_ssize_t i, a, b, best_b
    cdef double cand, va, top

    for b in range(n):
        score[b] = emissions[0, b] + omega * start[b]
    for i in range(1, k):
        for b in range(n):
            best[b] = -INFINITY
        for a in range(n):
            va = score[a]
            for b in range(n):
                cand = va + omega * trans[a, b]
                if cand > best[b]:  # strict: the lowest source label wins ties
                    best[b] = cand
                    back[i, b] = a
        for b in range(n):
            score[b] = emissions[i, b] + best[b]

    top = score[0] + omega * end[0]
    best_b = 0
    for b in range(1, n):
        cand = score[b] + omega * end[b]
        if cand > top:
            top = cand
            best_b = b
    path[k - 1] = best_b
    for i in range(k - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path_arr, top
