# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the zero-circle product.

Loops over angles run in parallel (OpenMP); each angle's sum is computed
sequentially, so results do not depend on the thread count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cos, exp, fabs, floor, log, log1p, sin, sqrt, M_PI

cnp.import_array()

cdef double SATURATE = 39.2
cdef double UNDERFLOW = 745.0


cdef inline double _log_abs_one_plus(double x, double half_phi) nogil:
    # log|1 + e^{x + i phi}| with phi = 2 half_phi; stable for huge |x| and near the zeros.
    # Only cos^2(phi/2) enters, so half_phi needs no range reduction.
    cdef double u, t, c, c2, s
    if x > 0:
        u = exp(-x)
    else:
        u = exp(x)
    c = cos(half_phi)
    c2 = c * c
    t = u * (u + 2.0 * (2.0 * c2 - 1.0))
    if fabs(t) < 0.5:
        s = 0.5 * log1p(t)
    else:
        s = 0.5 * log((1.0 - u) * (1.0 - u) + 4.0 * u * c2)
    if x > 0:
        return x + s
    return s


def log_abs_sum(double log_r, double[::1] thetas, double[::1] log_h, cnp.int64_t[::1] m):
    """sum_k log|1 + (r e^{i theta} / h_k)^{m_k}| for each theta."""
    cdef Py_ssize_t nt = thetas.shape[0], nk = log_h.shape[0], i, k
    cdef double acc, comp, y, t, term, phi, th, x
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in prange(nt, schedule="static"):
            th = thetas[i]
            acc = 0.0
            comp = 0.0
            for k in range(nk):
                x = <double> m[k] * (log_r - log_h[k])
                if x > SATURATE:
                    term = x  # the correction e^{-x} cos(phi) is below half an ulp of x
                elif x < -UNDERFLOW:
                    continue
                else:
                    term = _log_abs_one_plus(x, 0.5 * <double> m[k] * th)
                y = term - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
            o[i] = acc
    return out


def min_zero_distance(double r, double[::1] thetas, double[::1] radii, cnp.int64_t[::1] m):
    """Distance from r e^{i theta} to the nearest zero h_k e^{i pi (2j+1)/m_k}."""
    cdef Py_ssize_t nt = thetas.shape[0], nk = radii.shape[0], i, k
    cdef double best, d2, q, j, phi, delta, s, dr, th
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in prange(nt, schedule="static"):
            th = thetas[i]
            best = 1e308
            for k in range(nk):
                q = th * m[k] / (2.0 * M_PI) - 0.5
                j = floor(q + 0.5)
                phi = 2.0 * M_PI * (j + 0.5) / m[k]
                delta = th - phi
                s = sin(0.5 * delta)
                dr = r - radii[k]
                d2 = dr * dr + 4.0 * r * radii[k] * s * s
                if d2 < best:
                    best = d2
            o[i] = sqrt(best)
    return out
