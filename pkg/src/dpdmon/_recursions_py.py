"""Pure-Python recursion kernels.

Mirror images of the compiled kernels in ``_recursions.pyx``: same loop
structure and the same order of floating-point operations, so both backends
produce bitwise-identical output.  Used automatically when the extension is
not built (or when DPDMON_PURE_PYTHON=1).
"""

import numpy as np


def garch_path(theta, p, q, x, x2_lags, s2_lags, ds2_lags):
    """Volatility recursion with parameter gradients, continuing from lag state.

    theta = (omega, alpha_1..alpha_p, beta_1..beta_q).  Lag arrays are ordered
    most-recent-first and are not mutated; the advanced lag state is returned
    so callers can thread it across windows.

    Returns (sigma2 (m,), dsigma2 (m, d), x2_lags, s2_lags, ds2_lags).
    """
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    d = 1 + p + q
    m = x.shape[0]
    x2l = [float(v) for v in x2_lags]
    s2l = [float(v) for v in s2_lags]
    ds2l = [[float(ds2_lags[j, c]) for c in range(d)] for j in range(q)]
    th = [float(v) for v in theta]

    sigma2 = np.empty(m)
    dsigma2 = np.empty((m, d))
    row = [0.0] * d
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
                g += th[1 + p + j] * ds2l[j][c]
            row[c] = g
            dsigma2[t, c] = g

        for i in range(p - 1, 0, -1):
            x2l[i] = x2l[i - 1]
        if p > 0:
            xt = float(x[t])
            x2l[0] = xt * xt
        for j in range(q - 1, 0, -1):
            s2l[j] = s2l[j - 1]
            for c in range(d):
                ds2l[j][c] = ds2l[j - 1][c]
        if q > 0:
            s2l[0] = s2
            for c in range(d):
                ds2l[0][c] = row[c]

    return (
        sigma2,
        dsigma2,
        np.array(x2l, dtype=float),
        np.array(s2l, dtype=float),
        np.array(ds2l, dtype=float).reshape(q, d),
    )


def garch_simulate(theta, p, q, eps, x2_lags, s2_lags):
    """Generate observations x_t = sigma_t * eps_t from the recursion,
    continuing from lag state.  Returns (x (m,), x2_lags, s2_lags)."""
    theta = np.asarray(theta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    m = eps.shape[0]
    x2l = [float(v) for v in x2_lags]
    s2l = [float(v) for v in s2_lags]
    th = [float(v) for v in theta]

    import math

    x = np.empty(m)
    for t in range(m):
        s2 = th[0]
        for i in range(p):
            s2 += th[1 + i] * x2l[i]
        for j in range(q):
            s2 += th[1 + p + j] * s2l[j]
        xt = math.sqrt(s2) * float(eps[t])
        x[t] = xt
        for i in range(p - 1, 0, -1):
            x2l[i] = x2l[i - 1]
        if p > 0:
            x2l[0] = xt * xt
        for j in range(q - 1, 0, -1):
            s2l[j] = s2l[j - 1]
        if q > 0:
            s2l[0] = s2

    return x, np.array(x2l, dtype=float), np.array(s2l, dtype=float)


def kahan_cumsum(g):
    """Compensated (Kahan) cumulative sum down the rows of a 2-d array."""
    g = np.asarray(g, dtype=float)
    m, d = g.shape
    out = np.empty((m, d))
    acc = [0.0] * d
    comp = [0.0] * d
    for t in range(m):
        for c in range(d):
            y = float(g[t, c]) - comp[c]
            s = acc[c] + y
            comp[c] = (s - acc[c]) - y
            acc[c] = s
            out[t, c] = s
    return out
