# cython: boundscheck=False, wraparound=False
"""Compiled hot kernels: greedy permutation decode and earliest-fit sweep."""

import numpy as np
cimport numpy as cnp

BACKEND = "cython"


def greedy_placement(cnp.int64_t[:, :] requests, cnp.int64_t[:] free_in,
                     cnp.int64_t[:] order):
    cdef Py_ssize_t n = requests.shape[0]
    cdef Py_ssize_t R = requests.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] free = np.asarray(free_in).copy()
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] placed = np.zeros(n, dtype=np.uint8)
    cdef cnp.int64_t[:] fv = free
    cdef cnp.uint8_t[:] pv = placed
    cdef Py_ssize_t k, j, idx
    cdef bint fits
    for k in range(n):
        idx = order[k]
        fits = True
        for j in range(R):
            if requests[idx, j] > fv[j]:
                fits = False
                break
        if fits:
            for j in range(R):
                fv[j] -= requests[idx, j]
            pv[idx] = 1
    return placed.astype(bool), free


def earliest_fit(cnp.int64_t[:] free, cnp.int64_t[:] req,
                 cnp.float64_t[:] release_times,
                 cnp.int64_t[:, :] release_amounts, double clock):
    cdef Py_ssize_t R = free.shape[0]
    cdef Py_ssize_t m = release_times.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] avail = np.asarray(free).copy()
    cdef cnp.int64_t[:] av = avail
    cdef Py_ssize_t i, j
    cdef bint fits = True
    for j in range(R):
        if req[j] > av[j]:
            fits = False
            break
    if fits:
        return clock
    for i in range(m):
        for j in range(R):
            av[j] += release_amounts[i, j]
        if i + 1 < m and release_times[i + 1] == release_times[i]:
            continue
        fits = True
        for j in range(R):
            if req[j] > av[j]:
                fits = False
                break
        if fits:
            return max(release_times[i], clock)
    raise RuntimeError("insufficient capacity even after all releases")
