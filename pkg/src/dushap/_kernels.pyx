# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration and sampling kernels.

Semantics (and summation order) match ``_kernels_py``.
"""

import numpy as np

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def subset_sums(sizes):
    cdef const long long[::1] s = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i, m, half
    out = np.empty(1 << n, dtype=np.int64)
    cdef long long[::1] o = out
    o[0] = 0
    with nogil:
        for i in range(n):
            half = 1 << i
            for m in range(half):
                o[half + m] = o[m] + s[i]
    return out


def layer_marginal_sums(table, int n_players):
    cdef const double[::1] t = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n = n_players
    if t.shape[0] != (1 << n):
        raise ValueError(f"table must have length 2^{n}")
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] acc = out
    cdef Py_ssize_t i, m, total = 1 << n
    cdef unsigned long long bit
    with nogil:
        for i in range(n):
            bit = 1ULL << i
            for m in range(total):
                if m & bit:
                    continue
                acc[i, __builtin_popcountll(m)] += t[m | bit] - t[m]
    return out


def predecessor_masks(perms, long long player):
    cdef const long long[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t T = p.shape[0], n = p.shape[1], t, j
    if n > 62:
        raise ValueError("bitmask kernels support at most 62 players")
    out = np.empty(T, dtype=np.int64)
    cdef long long[::1] o = out
    cdef long long mask
    with nogil:
        for t in range(T):
            mask = 0
            for j in range(n):
                if p[t, j] == player:
                    break
                mask |= 1LL << p[t, j]
            o[t] = mask
    return out


def bernoulli_masks(uniforms, taus, long long player):
    cdef const double[:, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] tau = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t T = u.shape[0], n = u.shape[1], t, j
    if n > 62:
        raise ValueError("bitmask kernels support at most 62 players")
    out = np.empty(T, dtype=np.int64)
    cdef long long[::1] o = out
    cdef long long mask
    with nogil:
        for t in range(T):
            mask = 0
            for j in range(n):
                if j != player and u[t, j] < tau[t]:
                    mask |= 1LL << j
            o[t] = mask
    return out
