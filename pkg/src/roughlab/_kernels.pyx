# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: map orbits and exact q-variation dynamic programming.

Every function here has a numpy twin in ``_pure`` with the same signature
and the same results (bitwise for the doubling map and the DP, to libm
``pow`` rounding for the intermittent map).
"""
from libc.math cimport pow, sqrt
from libc.stdint cimport uint64_t

import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MASK53 = (1ULL << 53) - 1
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double ONE_MINUS = 1.0 - 1.0 / 9007199254740992.0


cdef inline uint64_t _splitmix(uint64_t *state) nogil:
    cdef uint64_t z
    state[0] += GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def doubling_chunk(uint64_t[::1] k, uint64_t[::1] rs, double[:, ::1] out):
    """Write ``out.shape[1]`` orbit points per replica and advance the state.

    The state ``k`` is the 53-bit binary expansion of y; one doubling step
    shifts it left and appends a fresh random bit.
    """
    cdef Py_ssize_t i, t
    cdef Py_ssize_t R = out.shape[0], C = out.shape[1]
    cdef uint64_t kk, st
    with nogil:
        for i in range(R):
            kk = k[i]
            st = rs[i]
            for t in range(C):
                out[i, t] = <double>kk * TWO_M53
                kk = ((kk << 1) & MASK53) | (_splitmix(&st) >> 63)
            k[i] = kk
            rs[i] = st


def lsv_chunk(double[::1] y, uint64_t[::1] rs, double gamma, double[:, ::1] out):
    """Intermittent-map analogue of :func:`doubling_chunk` (float state)."""
    cdef Py_ssize_t i, t
    cdef Py_ssize_t R = out.shape[0], C = out.shape[1]
    cdef double yy, bit
    cdef uint64_t st
    with nogil:
        for i in range(R):
            yy = y[i]
            st = rs[i]
            for t in range(C):
                out[i, t] = yy
                bit = <double>(_splitmix(&st) >> 63)
                if yy < 0.5:
                    yy = yy * (1.0 + pow(2.0 * yy, gamma))
                else:
                    yy = 2.0 * yy - 1.0
                yy = yy + bit * TWO_M53
                if yy >= 1.0:
                    yy = ONE_MINUS
            y[i] = yy
            rs[i] = st


def qvar_first(const double[:, ::1] X, double q):
    """sup over grid partitions of sum |X_t - X_s|^q (Euclidean norm)."""
    cdef Py_ssize_t N = X.shape[0], m = X.shape[1]
    cdef Py_ssize_t j, s, a
    cdef double acc, diff, cand, bj
    if N < 2:
        return 0.0
    cdef double[::1] best = np.zeros(N)
    with nogil:
        for j in range(1, N):
            bj = 0.0
            for s in range(j):
                acc = 0.0
                for a in range(m):
                    diff = X[j, a] - X[s, a]
                    acc = acc + diff * diff
                cand = best[s] + pow(sqrt(acc), q)
                if cand > bj:
                    bj = cand
            best[j] = bj
    return best[N - 1]


def qvar_second(const double[:, ::1] X, const double[:, :, ::1] M,
                const double[:, ::1] Xt, const double[:, :, ::1] Mt, double q):
    """sup over grid partitions of sum |XX_{s,t} - XXt_{s,t}|^q (Frobenius).

    Second-level increments are recovered by group division:
    XX_{s,t} = M_t - M_s - X_s (x) (X_t - X_s).
    """
    cdef Py_ssize_t N = X.shape[0], m = X.shape[1]
    cdef Py_ssize_t j, s, a, b
    cdef double acc, e, cand, bj
    if N < 2:
        return 0.0
    cdef double[::1] best = np.zeros(N)
    with nogil:
        for j in range(1, N):
            bj = 0.0
            for s in range(j):
                acc = 0.0
                for a in range(m):
                    for b in range(m):
                        e = (M[j, a, b] - M[s, a, b] - X[s, a] * (X[j, b] - X[s, b])) - (
                            Mt[j, a, b] - Mt[s, a, b] - Xt[s, a] * (Xt[j, b] - Xt[s, b]))
                        acc = acc + e * e
                cand = best[s] + pow(sqrt(acc), q)
                if cand > bj:
                    bj = cand
            best[j] = bj
    return best[N - 1]
