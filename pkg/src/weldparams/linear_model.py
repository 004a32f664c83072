"""Joint multi-output least squares: one factorization, three right-hand sides."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import Dataset

RANK_RCOND = 1e-10


def standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and std; constant columns get scale 1."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray  # (16, 3), acts on standardized inputs
    intercept: np.ndarray  # (3,)
    input_mean: np.ndarray
    input_scale: np.ndarray
    ridge: float = 0.0

    kind = "mlr"

    def __post_init__(self):
        for name in ("weights", "intercept", "input_mean", "input_scale"):
            a = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite {name}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def coef(self) -> np.ndarray:
        """Coefficients in raw input units, shape (16, 3)."""
        return self.weights / self.input_scale[:, None]

    @property
    def raw_intercept(self) -> np.ndarray:
        return self.intercept - self.input_mean @ self.coef

    def predict(self, X) -> np.ndarray:
        """Unclamped estimates, shape ``(n, 3)`` (or ``(3,)`` for one vector)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite input")
        out = ((X - self.input_mean) / self.input_scale) @ self.weights + self.intercept
        return out[0] if single else out


def fit_arrays(X: np.ndarray, Y: np.ndarray, ridge: float | None = None) -> LinearModel:
    """Fit ``Y ≈ standardize(X) @ W + b`` by QR.

    Constant columns carry no information and get zero weight. If the
    remaining design is rank deficient (or ``ridge`` is given) the system is
    regularized with ``lam = 1e-8 * trace(Z'Z) / p`` (or ``ridge``).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y row counts differ")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite training data")

    mean, scale = standardize_stats(X)
    Z = (X - mean) / scale
    y_mean = Y.mean(axis=0)
    Yc = Y - y_mean
    W = np.zeros((X.shape[1], Y.shape[1]))
    active = np.flatnonzero(X.std(axis=0) > 0)
    lam = 0.0
    if active.size:
        Za = Z[:, active]
        Q, R = np.linalg.qr(Za)
        diag = np.abs(np.diag(R))
        deficient = Za.shape[0] < Za.shape[1] or diag.min() <= RANK_RCOND * diag.max()
        if ridge is None and not deficient:
            W[active] = solve_triangular(R, Q.T @ Yc)
        else:
            G = Za.T @ Za
            lam = ridge if ridge is not None else 1e-8 * np.trace(G) / Za.shape[1]
            W[active] = np.linalg.solve(G + lam * np.eye(G.shape[0]), Za.T @ Yc)
    return LinearModel(W, y_mean, mean, scale, ridge=float(lam))


def fit_mlr(train: Dataset, ridge: float | None = None) -> LinearModel:
    return fit_arrays(train.X, train.Y, ridge=ridge)


def predict_mlr(model: LinearModel, x) -> np.ndarray:
    return model.predict(x)
