"""Epsilon-insensitive support vector regression with an RBF kernel.

Each of the three outputs gets its own dual problem; all share the
hyperparameters. Inputs and targets are standardized before solving, so
``epsilon`` and ``gamma`` act in standardized units.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _smo_backend
from .dataset import Dataset
from .linear_model import standardize_stats


@dataclass(frozen=True)
class SvrHyperParams:
    c: float = 35.0
    epsilon: float = 0.1
    gamma: float = 0.025
    kkt_tol: float = 1e-3
    max_passes: int = 10_000

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be > 0")
        if int(self.max_passes) < 1:
            raise ValueError("max_passes must be >= 1")

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "kkt_tol": self.kkt_tol,
            "max_passes": int(self.max_passes),
        }


def rbf_kernel(u, v, gamma: float) -> float:
    """``exp(-gamma * ||u - v||^2)``."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    if A is B:
        np.fill_diagonal(d2, 0.0)
    return np.exp(-gamma * d2)


def dual_objective(beta: np.ndarray, K: np.ndarray, y: np.ndarray, eps: float) -> float:
    return float(-0.5 * beta @ K @ beta - eps * np.abs(beta).sum() + y @ beta)


def _bias_interval(beta, g, C, eps):
    up = np.where(beta >= 0.0, g - eps, g + eps)
    down = np.where(beta <= 0.0, g + eps, g - eps)
    lower = up[beta < C].max()
    upper = down[beta > -C].min()
    return lower, upper


def compute_bias(beta: np.ndarray, f: np.ndarray, y: np.ndarray, C: float, eps: float) -> float:
    """Average over unbounded support vectors, else the middle of the feasible interval."""
    g = y - f
    free = (beta != 0.0) & (np.abs(beta) < C)
    if free.any():
        return float(np.mean(g[free] - eps * np.sign(beta[free])))
    lo, hi = _bias_interval(beta, g, C, eps)
    return float(0.5 * (lo + hi))


def kkt_violations(beta, residual, C, eps, tol) -> np.ndarray:
    """Indices breaking the KKT certificate; ``residual = f(x_i) - y_i``."""
    a = np.abs(np.asarray(beta))
    r = np.abs(np.asarray(residual))
    bad = np.zeros(a.shape, dtype=bool)
    zero = a == 0.0
    at_bound = a >= C
    free = ~zero & ~at_bound
    bad |= zero & (r > eps + tol)
    bad |= free & (np.abs(r - eps) > tol)
    bad |= at_bound & (r < eps - tol)
    return np.flatnonzero(bad)


@dataclass(frozen=True, eq=False)
class DualSolution:
    beta: np.ndarray
    bias: float
    f: np.ndarray
    n_iter: int
    converged: bool
    history: list | None = None

    def residual(self, y: np.ndarray) -> np.ndarray:
        return self.f + self.bias - y


def solve_svr_dual(K: np.ndarray, y: np.ndarray, hp: SvrHyperParams, record: bool = False,
                   solver=None) -> DualSolution:
    """Solve one single-output dual on a precomputed kernel matrix."""
    y = np.ascontiguousarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty training set")
    solve = solver or _smo_backend.solve_dual
    beta, f, n_iter, converged, history = solve(
        np.ascontiguousarray(K, dtype=float), y, float(hp.c), float(hp.epsilon),
        float(hp.kkt_tol), int(hp.max_passes), record,
    )
    bias = compute_bias(beta, f, y, hp.c, hp.epsilon)
    return DualSolution(beta, bias, f, int(n_iter), bool(converged), history)


@dataclass(frozen=True, eq=False)
class SvrModel:
    hp: SvrHyperParams
    input_mean: np.ndarray
    input_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray
    support: tuple[np.ndarray, ...]  # standardized support vectors per output
    coef: tuple[np.ndarray, ...]  # beta per support vector per output
    bias: np.ndarray  # (3,), standardized units
    n_iter: tuple[int, ...] = field(default=())
    converged: tuple[bool, ...] = field(default=())

    kind = "svr"

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite input")
        Z = (X - self.input_mean) / self.input_scale
        out = np.empty((Z.shape[0], len(self.coef)))
        for k, (sv, beta) in enumerate(zip(self.support, self.coef)):
            s = rbf_gram(Z, sv, self.hp.gamma) @ beta if beta.size else np.zeros(Z.shape[0])
            out[:, k] = s + self.bias[k]
        out = out * self.target_scale + self.target_mean
        return out[0] if single else out


def fit_svr_arrays(X: np.ndarray, Y: np.ndarray, hp: SvrHyperParams | None = None) -> SvrModel:
    hp = hp or SvrHyperParams()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    x_mean, x_scale = standardize_stats(X)
    y_mean, y_scale = standardize_stats(Y)
    Z = (X - x_mean) / x_scale
    T = (Y - y_mean) / y_scale
    K = rbf_gram(Z, Z, hp.gamma)
    support, coef, bias, iters, conv = [], [], [], [], []
    for k in range(T.shape[1]):
        sol = solve_svr_dual(K, T[:, k], hp)
        keep = sol.beta != 0.0
        support.append(Z[keep].copy())
        coef.append(sol.beta[keep].copy())
        bias.append(sol.bias)
        iters.append(sol.n_iter)
        conv.append(sol.converged)
    return SvrModel(hp, x_mean, x_scale, y_mean, y_scale, tuple(support), tuple(coef),
                    np.array(bias), tuple(iters), tuple(conv))


def fit_svr(train: Dataset, hp: SvrHyperParams | None = None) -> SvrModel:
    return fit_svr_arrays(train.X, train.Y, hp)


def predict_svr(model: SvrModel, x) -> np.ndarray:
    return model.predict(x)
