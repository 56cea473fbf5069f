# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk kernels. Stream layout is documented in ``_pykernels``."""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def walk_sums(uint64_t seed, Py_ssize_t start, Py_ssize_t count, Py_ssize_t n):
    out = np.zeros((count, n + 1), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    cdef Py_ssize_t j, i
    cdef uint64_t key, word = 0
    cdef int64_t s
    with nogil:
        for j in range(count):
            key = mix64(seed + <uint64_t>(start + j + 1) * GAMMA)
            s = 0
            for i in range(n):
                if i % 64 == 0:
                    word = mix64(key + <uint64_t>(i // 64 + 1) * GAMMA)
                if (word >> (i % 64)) & 1:
                    s += 1
                else:
                    s -= 1
                o[j, i + 1] = s
    return out


def abs_endpoints(uint64_t seed, Py_ssize_t start, Py_ssize_t count, Py_ssize_t n):
    out = np.zeros(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t j, k
    cdef Py_ssize_t full = n // 64
    cdef Py_ssize_t rem = n % 64
    cdef uint64_t key, word
    cdef int64_t ones, s
    with nogil:
        for j in range(count):
            key = mix64(seed + <uint64_t>(start + j + 1) * GAMMA)
            ones = 0
            for k in range(full):
                ones += __builtin_popcountll(mix64(key + <uint64_t>(k + 1) * GAMMA))
            if rem:
                word = mix64(key + <uint64_t>(full + 1) * GAMMA)
                ones += __builtin_popcountll(word & ((1ULL << rem) - 1))
            s = 2 * ones - n
            o[j] = s if s >= 0 else -s
    return out
