# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recursion kernels.

Keep the loop bodies in lockstep with ``_recursions_py.py``: the pure-Python
twin performs the identical sequence of IEEE operations, and the test suite
asserts bitwise agreement between the two backends.
"""

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def garch_path(theta, int p, int q, x, x2_lags, s2_lags, ds2_lags):
    """Volatility recursion with parameter gradients; see the pure twin."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int d = 1 + p + q
    cdef Py_ssize_t m = xv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x2l = np.array(x2_lags, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s2l = np.array(s2_lags, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ds2l = np.array(ds2_lags, dtype=np.float64).reshape(q, d).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sigma2 = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dsigma2 = np.empty((m, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row = np.zeros(d, dtype=np.float64)

    cdef Py_ssize_t t
    cdef int i, j, c
    cdef double s2, g, xt

    for t in range(m):
        s2 = th[0]
        for i in range(p):
            s2 += th[1 + i] * x2l[i]
        for j in range(q):
            s2 += th[1 + p + j] * s2l[j]
        sigma2[t] = s2

        for c in range(d):
            if c == 0:
                g = 1.0
            elif c <= p:
                g = x2l[c - 1]
            else:
                g = s2l[c - 1 - p]
            for j in range(q):
                g += th[1 + p + j] * ds2l[j, c]
            row[c] = g
            dsigma2[t, c] = g

        for i in range(p - 1, 0, -1):
            x2l[i] = x2l[i - 1]
        if p > 0:
            xt = xv[t]
            x2l[0] = xt * xt
        for j in range(q - 1, 0, -1):
            s2l[j] = s2l[j - 1]
            for c in range(d):
                ds2l[j, c] = ds2l[j - 1, c]
        if q > 0:
            s2l[0] = s2
            for c in range(d):
                ds2l[0, c] = row[c]

    return sigma2, dsigma2, x2l, s2l, ds2l


def garch_simulate(theta, int p, int q, eps, x2_lags, s2_lags):
    """Generate x_t = sigma_t * eps_t continuing from lag state; see the pure twin."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ev = np.ascontiguousarray(eps, dtype=np.float64)
    cdef Py_ssize_t m = ev.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x2l = np.array(x2_lags, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s2l = np.array(s2_lags, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(m, dtype=np.float64)

    cdef Py_ssize_t t
    cdef int i, j
    cdef double s2, xt

    for t in range(m):
        s2 = th[0]
        for i in range(p):
            s2 += th[1 + i] * x2l[i]
        for j in range(q):
            s2 += th[1 + p + j] * s2l[j]
        xt = sqrt(s2) * ev[t]
        x[t] = xt
        for i in range(p - 1, 0, -1):
            x2l[i] = x2l[i - 1]
        if p > 0:
            x2l[0] = xt * xt
        for j in range(q - 1, 0, -1):
            s2l[j] = s2l[j - 1]
        if q > 0:
            s2l[0] = s2

    return x, x2l, s2l


def kahan_cumsum(g):
    """Compensated (Kahan) cumulative sum down the rows of a 2-d array."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t m = gv.shape[0]
    cdef int d = gv.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((m, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] comp = np.zeros(d, dtype=np.float64)

    cdef Py_ssize_t t
    cdef int c
    cdef double y, s

    for t in range(m):
        for c in range(d):
            y = gv[t, c] - comp[c]
            s = acc[c] + y
            comp[c] = (s - acc[c]) - y
            acc[c] = s
            out[t, c] = s
    return out
