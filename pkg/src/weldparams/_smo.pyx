# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SMO solver for the epsilon-SVR dual.

Same algorithm and operation order as ``_smo_py.solve_dual``; see there for
the problem statement.
"""
import numpy as np

from libc.math cimport INFINITY, fabs

cdef double TAU = 1e-12


cdef inline double _clip(double v, double C) nogil:
    if v > C:
        return C
    if v < -C:
        return -C
    return v


cdef double _line_search(double bi, double bj, double gi, double gj, double eta,
                         double eps, double hi) nogil:
    cdef double k1 = -bi, k2 = bj, tmp, a = 0.0, b, m, si, sj, slope0, t
    if k1 > k2:
        tmp = k1
        k1 = k2
        k2 = tmp
    while True:
        if 0.0 < k1 < hi and a < k1:
            b = k1
        elif 0.0 < k2 < hi and a < k2:
            b = k2
        else:
            b = hi
        m = 0.5 * (a + b)
        si = 1.0 if bi + m > 0.0 else -1.0
        sj = 1.0 if bj - m > 0.0 else -1.0
        slope0 = gi - gj - eps * si + eps * sj
        if eta > TAU:
            t = slope0 / eta
            if t <= a:
                return a
            if t < b:
                return t
        elif slope0 <= 0.0:
            return a
        if b >= hi:
            return hi
        a = b


def line_search(double bi, double bj, double gi, double gj, double eta, double eps, double hi):
    return _line_search(bi, bj, gi, gj, eta, eps, hi)


def _objective(y, beta, f, double eps):
    return float(y @ beta - 0.5 * (beta @ f) - eps * np.abs(beta).sum())


def solve_dual(K, y, double C, double eps, double tol, Py_ssize_t max_iter, bint record=False):
    """Return ``(beta, f, n_iter, converged, history)`` with ``f = K @ beta``."""
    cdef double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] yv = y_arr
    cdef Py_ssize_t n = yv.shape[0]
    beta_arr = np.zeros(n)
    f_arr = np.zeros(n)
    cdef double[::1] beta = beta_arr
    cdef double[::1] f = f_arr
    cdef Py_ssize_t it = 0, k, i, j
    cdef double g, up, down, upper, lower, eta, diff, gain, best, t, hi, bi, bj, gi, gj
    cdef bint converged = False
    history = [0.0] if record else None

    while it < max_iter:
        i = -1
        upper = -INFINITY
        lower = INFINITY
        for k in range(n):
            g = yv[k] - f[k]
            if beta[k] < C:
                up = g - eps if beta[k] >= 0.0 else g + eps
                if up > upper:
                    upper = up
                    i = k
            if beta[k] > -C:
                down = g + eps if beta[k] <= 0.0 else g - eps
                if down < lower:
                    lower = down
        if upper - lower <= tol:
            converged = True
            break
        j = -1
        best = -INFINITY
        for k in range(n):
            if beta[k] > -C:
                g = yv[k] - f[k]
                down = g + eps if beta[k] <= 0.0 else g - eps
                diff = upper - down
                if diff > 0.0:
                    eta = Kv[i, i] + Kv[k, k] - 2.0 * Kv[i, k]
                    if not eta > TAU:
                        eta = TAU
                    gain = diff * diff / eta
                    if gain > best:
                        best = gain
                        j = k
        gi = yv[i] - f[i]
        gj = yv[j] - f[j]
        hi = C - beta[i]
        if beta[j] + C < hi:
            hi = beta[j] + C
        t = _line_search(beta[i], beta[j], gi, gj, Kv[i, i] + Kv[j, j] - 2.0 * Kv[i, j], eps, hi)
        bi = beta[i] + t
        bj = beta[j] - t
        beta[i] = _clip(bi, C)
        beta[j] = _clip(bj, C)
        for k in range(n):
            f[k] += t * (Kv[i, k] - Kv[j, k])
        it += 1
        if record:
            # same numpy expression as the fallback so histories match bit for bit
            history.append(_objective(y_arr, beta_arr, f_arr, eps))
    return beta_arr, f_arr, it, converged, history
