# cython: language_level=3
"""Compiled inner loops. Must stay numerically identical to _kernels_py."""

cimport cython
from libc.math cimport fabs


@cython.boundscheck(False)
@cython.wraparound(False)
def dcd_epoch(const long[::1] indptr, const long[::1] indices, const double[::1] data,
              const double[::1] y, double[::1] alpha, double[::1] w,
              const double[::1] sqnorm, const long[::1] order, double C):
    cdef Py_ssize_t t, i, k, lo, hi
    cdef double g, G, a, pg, new, d, change
    cdef double max_change = 0.0
    for t in range(order.shape[0]):
        i = order[t]
        lo = indptr[i]
        hi = indptr[i + 1]
        g = 0.0
        for k in range(lo, hi):
            g = g + w[indices[k]] * data[k]
        G = y[i] * g - 1.0
        a = alpha[i]
        if a == 0.0:
            pg = G if G < 0.0 else 0.0
        elif a == C:
            pg = G if G > 0.0 else 0.0
        else:
            pg = G
        if fabs(pg) > 1e-12:
            new = a - G / sqnorm[i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            d = (new - a) * y[i]
            alpha[i] = new
            for k in range(lo, hi):
                w[indices[k]] = w[indices[k]] + d * data[k]
            change = fabs(new - a)
            if change > max_change:
                max_change = change
    return max_change


@cython.boundscheck(False)
@cython.wraparound(False)
def csr_dot(const long[::1] indptr, const long[::1] indices, const double[::1] data,
            const double[::1] w, double[::1] out):
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(out.shape[0]):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s = s + w[indices[k]] * data[k]
        out[i] = s
