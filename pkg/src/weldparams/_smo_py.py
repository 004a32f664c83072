"""Pure numpy SMO solver for the epsilon-SVR dual (fallback for ``_smo.pyx``).

Both backends solve

    max  -1/2 b'Kb - eps*|b|_1 + y'b   s.t.  sum(b) = 0,  -C <= b_i <= C

with pair updates ``b_i += t, b_j -= t`` and an exact line search over the
piecewise-quadratic objective. Keep the arithmetic here in step with the
Cython version so both give the same iterates.
"""
from __future__ import annotations

import numpy as np

TAU = 1e-12


def line_search(bi: float, bj: float, gi: float, gj: float, eta: float, eps: float, hi: float) -> float:
    """Maximize ``phi(t) = t(gi-gj) - eta t^2/2 - eps(|bi+t|-|bi|) - eps(|bj-t|-|bj|)`` on [0, hi].

    phi is concave with kinks at ``t = -bi`` and ``t = bj``; walk the
    segments left to right and stop at the first one containing the maximum.
    """
    k1 = -bi
    k2 = bj
    if k1 > k2:
        k1, k2 = k2, k1
    a = 0.0
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


def solve_dual(K, y, C, eps, tol, max_iter, record=False):
    """Return ``(beta, f, n_iter, converged, history)`` with ``f = K @ beta``."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    beta = np.zeros(n)
    f = np.zeros(n)
    diag = np.ascontiguousarray(np.diag(K))
    history = [0.0] if record else None
    converged = False
    it = 0
    while it < max_iter:
        g = y - f
        up = np.where(beta >= 0.0, g - eps, g + eps)
        down = np.where(beta <= 0.0, g + eps, g - eps)
        can_up = beta < C
        can_down = beta > -C
        up_m = np.where(can_up, up, -np.inf)
        down_m = np.where(can_down, down, np.inf)
        i = int(np.argmax(up_m))
        upper = up_m[i]
        lower = down_m.min()
        if upper - lower <= tol:
            converged = True
            break
        eta = diag[i] + diag - 2.0 * K[i]
        eta = np.where(eta > TAU, eta, TAU)
        diff = upper - down_m
        gain = np.where(diff > 0.0, diff * diff / eta, -np.inf)
        j = int(np.argmax(gain))
        hi = min(C - beta[i], beta[j] + C)
        t = line_search(beta[i], beta[j], g[i], g[j], diag[i] + diag[j] - 2.0 * K[i, j], eps, hi)
        bi = beta[i] + t
        bj = beta[j] - t
        beta[i] = C if bi > C else (-C if bi < -C else bi)
        beta[j] = C if bj > C else (-C if bj < -C else bj)
        f += t * (K[i] - K[j])
        it += 1
        if record:
            history.append(float(y @ beta - 0.5 * (beta @ f) - eps * np.abs(beta).sum()))
    return beta, f, it, converged, history
