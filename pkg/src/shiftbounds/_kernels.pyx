# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for prior-weighted band sums and correlations."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def band_sum(const double[::1] q, const double[:, ::1] resp, bint periodic):
    cdef Py_ssize_t nx = resp.shape[0]
    cdef Py_ssize_t nz = resp.shape[1]
    cdef Py_ssize_t i, j, k, nout, off
    cdef double w
    if q.shape[0] != nx:
        raise ValueError("q and response rows differ in length")
    if periodic:
        if nx != nz:
            raise ValueError("periodic band sum needs a square response")
        out = np.zeros(nx, dtype=np.float64)
        _band_periodic(q, resp, out)
        return out
    nout = nx + nz - 1
    out = np.zeros(nout, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(nx):
        w = q[i]
        if w == 0.0:
            continue
        off = nx - 1 - i
        for j in range(nz):
            o[off + j] += w * resp[i, j]
    return out


cdef void _band_periodic(const double[::1] q, const double[:, ::1] resp,
                         double[::1] o) nogil:
    cdef Py_ssize_t n = resp.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double w
    for i in range(n):
        w = q[i]
        if w == 0.0:
            continue
        k = n - i
        for j in range(n):
            if k == n:
                k = 0
            o[k] += w * resp[i, j]
            k += 1


def correlate(const double[::1] q, const double[:, ::1] prof, bint periodic):
    cdef Py_ssize_t nx = q.shape[0]
    cdef Py_ssize_t nz = prof.shape[0]
    cdef Py_ssize_t nc = prof.shape[1]
    cdef Py_ssize_t i, j, c, k, off
    cdef double w
    if periodic:
        if nx != nz:
            raise ValueError("periodic correlation needs equal lengths")
        out = np.zeros((nz, nc), dtype=np.float64)
    else:
        out = np.zeros((nx + nz - 1, nc), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(nx):
            w = q[i]
            if w == 0.0:
                continue
            if periodic:
                k = nz - i
                for j in range(nz):
                    if k == nz:
                        k = 0
                    for c in range(nc):
                        o[k, c] += w * prof[j, c]
                    k += 1
            else:
                off = nx - 1 - i
                for j in range(nz):
                    for c in range(nc):
                        o[off + j, c] += w * prof[j, c]
    return out
