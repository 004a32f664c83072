"""Brute-force reference solver for the epsilon-SVR dual.

Works on the textbook 2n-variable form (alpha, alpha_star in [0, C],
sum(alpha - alpha_star) = 0) with accelerated projected gradient and
adaptive restart. The projection onto box-and-hyperplane is exact: its
multiplier solves a monotone piecewise-linear equation whose breakpoints
are enumerated. A final active-set polish removes the slow tail on
ill-conditioned kernels, and :func:`duality_gap` certifies the result
without reference to any other solver.
"""
import numpy as np


def project(a, s, C):
    """Euclidean projection of (a, s) onto {0 <= a, s <= C, sum(a) = sum(s)}."""
    bps = np.unique(np.concatenate([a, a - C, -s, C - s]))
    vals = (np.clip(a[None, :] - bps[:, None], 0, C).sum(1)
            - np.clip(s[None, :] + bps[:, None], 0, C).sum(1))  # non-increasing in nu
    if vals[0] <= 0:
        nu = bps[0]
    elif vals[-1] >= 0:
        nu = bps[-1]
    else:
        k = np.flatnonzero(vals < 0)[0]
        lo, hi, vlo, vhi = bps[k - 1], bps[k], vals[k - 1], vals[k]
        nu = lo + (hi - lo) * vlo / (vlo - vhi)  # linear between breakpoints
    return np.clip(a - nu, 0, C), np.clip(s + nu, 0, C)


def objective(beta, K, y, eps):
    return float(-0.5 * beta @ K @ beta - eps * np.abs(beta).sum() + y @ beta)


def primal_value(beta, K, y, C, eps):
    """min over b of 1/2 b'Kb + C * sum(max(0, |Kb + b - y| - eps)); convex piecewise linear in b."""
    f = K @ beta
    cands = np.concatenate([y - f - eps, y - f + eps])

    def p(b):
        return 0.5 * beta @ f + C * np.maximum(0.0, np.abs(f + b - y) - eps).sum()

    return min(p(b) for b in cands)


def duality_gap(beta, K, y, C, eps):
    return primal_value(beta, K, y, C, eps) - objective(beta, K, y, eps)


def _polish(beta, K, y, C, eps, tol=1e-6):
    """Solve the equality-constrained QP on the support pattern suggested by ``beta``."""
    upper = beta >= C - tol
    lower = beta <= -C + tol
    zero = np.abs(beta) <= tol
    free = ~(upper | lower | zero)
    fixed = np.where(upper, C, np.where(lower, -C, 0.0))
    F = np.flatnonzero(free)
    if F.size == 0:
        return fixed
    s = np.sign(beta[F])
    rhs = y[F] - eps * s - K[np.ix_(F, ~free)] @ fixed[~free]
    m = F.size
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = K[np.ix_(F, F)]
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    sol = np.linalg.lstsq(A, np.r_[rhs, -fixed.sum()], rcond=None)[0]
    out = fixed.copy()
    out[F] = sol[:m]
    if np.any(np.sign(out[F]) != s) or np.any(np.abs(out[F]) > C):
        return None
    return out


def solve(K, y, C, eps, iters=100000, gap_tol=1e-9):
    n = len(y)
    L = 2.0 * np.linalg.eigvalsh(K).max() + 1e-12
    a = np.zeros(n)
    s = np.zeros(n)
    za, zs = a.copy(), s.copy()
    t = 1.0
    best = objective(a - s, K, y, eps)
    for k in range(iters):
        if k % 100 == 0:
            for tol in (1e-3, 1e-5, 1e-7, 1e-9):
                polished = _polish(a - s, K, y, C, eps, tol)
                if polished is not None and duality_gap(polished, K, y, C, eps) < gap_tol:
                    return polished, objective(polished, K, y, eps)
        kb = K @ (za - zs)
        # gradient of the minimized negative objective
        na, ns = project(za - (kb + eps - y) / L, zs - (-kb + eps + y) / L, C)
        val = objective(na - ns, K, y, eps)
        if val < best:  # restart momentum
            za, zs, t = a.copy(), s.copy(), 1.0
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        za = na + (t - 1) / t_next * (na - a)
        zs = ns + (t - 1) / t_next * (ns - s)
        a, s, t, best = na, ns, t_next, val
    beta = a - s
    polished = _polish(beta, K, y, C, eps)
    if polished is not None and objective(polished, K, y, eps) > best:
        beta = polished
    return beta, objective(beta, K, y, eps)
