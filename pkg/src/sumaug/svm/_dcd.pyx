# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled dual coordinate descent sweep (hot kernel).

Must stay semantically identical to _dcd_py.sweep: same update rule, same
visit order, same projected-gradient bookkeeping.
"""

import numpy as np

cimport numpy as cnp

BACKEND = "compiled"


def sweep(
    double[::1] values,
    long long[::1] col_idx,
    long long[::1] indptr,
    double[::1] y,
    double[::1] diag,
    double inv_2c,
    double[::1] alpha,
    double[::1] w,
    long long[::1] perm,
):
    """One pass over coordinates in `perm`; returns the max |projected gradient|."""
    cdef double max_viol = 0.0
    cdef double g, pg, new_alpha, delta, wx
    cdef Py_ssize_t pos, i, j
    cdef long long lo, hi
    cdef Py_ssize_t n = perm.shape[0]
    for pos in range(n):
        i = <Py_ssize_t> perm[pos]
        lo = indptr[i]
        hi = indptr[i + 1]
        wx = 0.0
        for j in range(lo, hi):
            wx += w[col_idx[j]] * values[j]
        g = y[i] * wx - 1.0 + alpha[i] * inv_2c
        if alpha[i] == 0.0 and g > 0.0:
            pg = 0.0
        else:
            pg = g
        if -pg > max_viol:
            max_viol = -pg
        elif pg > max_viol:
            max_viol = pg
        if pg != 0.0:
            new_alpha = alpha[i] - g / diag[i]
            if new_alpha < 0.0:
                new_alpha = 0.0
            delta = (new_alpha - alpha[i]) * y[i]
            if delta != 0.0:
                for j in range(lo, hi):
                    w[col_idx[j]] += delta * values[j]
            alpha[i] = new_alpha
    return max_viol
