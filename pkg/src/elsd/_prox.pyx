# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for the overlapping-group dual prox sweeps.

Same contract as elsd._prox_py.run_prox, but iterates the canonical
group order sequentially in C. See _prox_py for the layout conventions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def run_prox(double[::1] h_ext, double[::1] r_ext, double[:, ::1] xi,
             const cnp.int64_t[:, ::1] idx, const cnp.int32_t[::1] sizes,
             const double[::1] radii, const cnp.int32_t[::1] order,
             double tol, int max_sweeps):
    """Sweep until the duality-gap certificate holds.

    Returns (gap, sweeps, converged); mutates ``r_ext`` (which becomes the
    prox result on its first p entries) and ``xi`` in place.
    """
    cdef Py_ssize_t p = h_ext.shape[0] - 1
    cdef Py_ssize_t n_groups = idx.shape[0]
    cdef Py_ssize_t max_size = idx.shape[1]

    cdef double[::1] v = np.empty(max_size, dtype=np.float64)
    cdef double[::1] a = np.empty(max_size, dtype=np.float64)
    cdef double[::1] srt = np.empty(max_size, dtype=np.float64)

    cdef Py_ssize_t oi, g, k, m, i, ii, jj
    cdef cnp.int64_t j
    cdef int sweep
    cdef double radius, l1, key, csum, theta, t, xin, change, max_change
    cdef double half_h_sq = 0.0, sq, s_sq, group_max, val, norm_term
    cdef double primal, dual, gap = 0.0

    for i in range(p):
        half_h_sq += h_ext[i] * h_ext[i]
    half_h_sq *= 0.5

    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for oi in range(n_groups):
            g = order[oi]
            m = sizes[g]
            radius = radii[g]
            l1 = 0.0
            for k in range(m):
                j = idx[g, k]
                v[k] = r_ext[j] + xi[g, k]
                a[k] = fabs(v[k])
                l1 += a[k]
            if l1 <= radius:
                for k in range(m):
                    change = fabs(v[k] - xi[g, k])
                    if change > max_change:
                        max_change = change
                    r_ext[idx[g, k]] = 0.0
                    xi[g, k] = v[k]
            else:
                for k in range(m):
                    srt[k] = a[k]
                for ii in range(1, m):
                    key = srt[ii]
                    jj = ii - 1
                    while jj >= 0 and srt[jj] < key:
                        srt[jj + 1] = srt[jj]
                        jj -= 1
                    srt[jj + 1] = key
                csum = 0.0
                theta = 0.0
                for k in range(m):
                    csum += srt[k]
                    t = (csum - radius) / (k + 1)
                    if srt[k] > t:
                        theta = t
                for k in range(m):
                    xin = a[k] - theta
                    if xin < 0.0:
                        xin = 0.0
                    if v[k] < 0.0:
                        xin = -xin
                    change = fabs(xin - xi[g, k])
                    if change > max_change:
                        max_change = change
                    r_ext[idx[g, k]] = v[k] - xin
                    xi[g, k] = xin

        sq = 0.0
        s_sq = 0.0
        for i in range(p):
            val = h_ext[i] - r_ext[i]
            sq += val * val
            s_sq += r_ext[i] * r_ext[i]
        norm_term = 0.0
        for g in range(n_groups):
            m = sizes[g]
            group_max = 0.0
            for k in range(m):
                val = fabs(r_ext[idx[g, k]])
                if val > group_max:
                    group_max = val
            norm_term += radii[g] * group_max
        primal = 0.5 * sq + norm_term
        dual = half_h_sq - 0.5 * s_sq
        gap = primal - dual
        if max_change <= tol and gap <= tol * (1.0 + fabs(primal)):
            return gap, sweep, True

    return gap, max_sweeps, False
