# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the fixed-step integrator."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def affine_recursion(double[:, ::1] phi, double[:, ::1] g, double[::1] x0,
                     double guard, int watch=0):
    """Iterate ``x[k+1] = phi @ x[k] + g[k]``.

    Stops early when ``|x[k][watch]|`` exceeds ``guard``; returns the filled
    state array and the offending index (``-1`` when the run completed).
    """
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t steps = g.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double acc
    out_arr = np.zeros((steps + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        out[0, i] = x0[i]
    if fabs(out[0, watch]) > guard:
        return out_arr, 0
    for k in range(steps):
        for i in range(n):
            acc = g[k, i]
            for j in range(n):
                acc = acc + phi[i, j] * out[k, j]
            out[k + 1, i] = acc
        if fabs(out[k + 1, watch]) > guard:
            return out_arr, k + 1
    return out_arr, -1
