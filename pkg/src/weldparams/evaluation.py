"""Metrics, per-model reports and the per-parameter model recommendation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import PARAM_NAMES, PARAM_UNITS, Dataset

TOLERANCE = 0.15


def _pair(real, pred) -> tuple[np.ndarray, np.ndarray]:
    real = np.asarray(real, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if real.size == 0:
        raise ValueError("empty value list")
    if real.shape != pred.shape:
        raise ValueError(f"length mismatch: {real.size} real vs {pred.size} predicted")
    return real, pred


def mae(real, pred) -> float:
    real, pred = _pair(real, pred)
    return float(np.mean(np.abs(pred - real)))


def tolerance_accuracy(real, pred, tol: float = TOLERANCE) -> float:
    """Fraction of predictions within ``±tol`` of the real value (boundary counts as inside)."""
    real, pred = _pair(real, pred)
    if np.any(real <= 0):
        raise ValueError("relative tolerance needs real values > 0")
    # a few ulps of slack so decimal boundaries like 3.0 -> 3.45 count as inside
    slack = 4 * np.finfo(float).eps * np.maximum(np.abs(real), np.abs(pred))
    return float(np.mean(np.abs(pred - real) <= tol * real + slack))


@dataclass(frozen=True)
class ParamScore:
    mae: float
    accuracy: float
    n: int


@dataclass(frozen=True, eq=False)
class EvalReport:
    model_name: str
    scores: dict  # parameter name -> ParamScore
    real: np.ndarray  # (n, 3)
    pred: np.ndarray  # (n, 3)

    @property
    def residuals(self) -> np.ndarray:
        return self.pred - self.real

    @property
    def n(self) -> int:
        return self.real.shape[0]

    def score(self, param: str) -> ParamScore:
        return self.scores[param]

    def write_residuals_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            head = ["record"]
            for p in PARAM_NAMES:
                head += [f"{p}_real", f"{p}_pred", f"{p}_residual"]
            w.writerow(head)
            for k in range(self.n):
                row = [k]
                for j in range(3):
                    row += [repr(float(self.real[k, j])), repr(float(self.pred[k, j])),
                            repr(float(self.pred[k, j] - self.real[k, j]))]
                w.writerow(row)

    def write_scatter_csv(self, param: str, path: str | Path, tol: float = TOLERANCE) -> None:
        """Real vs predicted with the tolerance band, one row per test record."""
        j = PARAM_NAMES.index(param)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["real", "pred", "lower", "upper"])
            for r, p in zip(self.real[:, j], self.pred[:, j]):
                w.writerow([repr(float(r)), repr(float(p)), repr(float((1 - tol) * r)), repr(float((1 + tol) * r))])


def report_from_predictions(name: str, real: np.ndarray, pred: np.ndarray, tol: float = TOLERANCE) -> EvalReport:
    real = np.atleast_2d(np.asarray(real, dtype=float))
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    if real.shape != pred.shape:
        raise ValueError(f"shape mismatch {real.shape} vs {pred.shape}")
    scores = {
        p: ParamScore(mae(real[:, j], pred[:, j]), tolerance_accuracy(real[:, j], pred[:, j], tol), real.shape[0])
        for j, p in enumerate(PARAM_NAMES)
    }
    return EvalReport(name, scores, real, pred)


def evaluate(model, test: Dataset, name: str | None = None, tol: float = TOLERANCE) -> EvalReport:
    """Score ``model.predict`` on ``test``.

    Any object with ``predict(X) -> (n, 3)`` works; image models encode the
    wire vectors themselves, without augmentation.
    """
    pred = np.asarray(model.predict(test.X), dtype=float)
    return report_from_predictions(name or getattr(model, "kind", type(model).__name__), test.Y, pred, tol)


@dataclass(frozen=True)
class Choice:
    model_name: str
    accuracy: float
    mae: float


@dataclass(frozen=True)
class Recommendation:
    choices: dict  # parameter name -> Choice

    def model_for(self, param: str) -> str:
        return self.choices[param].model_name

    def as_tuple(self) -> tuple[str, str, str]:
        return tuple(self.choices[p].model_name for p in PARAM_NAMES)  # type: ignore[return-value]


def recommend(reports: Sequence[EvalReport]) -> Recommendation:
    """Per parameter, highest accuracy; ties go to lower MAE, then model name."""
    if not reports:
        raise ValueError("need at least one report")
    sizes = {r.scores[p].n for r in reports for p in PARAM_NAMES}
    if len(sizes) != 1:
        raise ValueError(f"reports were computed on different test sizes {sorted(sizes)}")
    choices = {}
    for p in PARAM_NAMES:
        best = min(reports, key=lambda r: (-r.scores[p].accuracy, r.scores[p].mae, r.model_name))
        choices[p] = Choice(best.model_name, best.scores[p].accuracy, best.scores[p].mae)
    return Recommendation(choices)


def combined_predict(rec: Recommendation, models: Mapping[str, object], X) -> np.ndarray:
    """Assemble each parameter from its recommended model."""
    missing = {rec.model_for(p) for p in PARAM_NAMES} - set(models)
    if missing:
        raise KeyError(f"missing models {sorted(missing)}")
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    cache: dict[str, np.ndarray] = {}
    out = np.empty((X2.shape[0], 3))
    for j, p in enumerate(PARAM_NAMES):
        name = rec.model_for(p)
        if name not in cache:
            cache[name] = np.atleast_2d(models[name].predict(X2))
        out[:, j] = cache[name][:, j]
    return out[0] if single else out


class CombinedPredictor:
    kind = "combined"

    def __init__(self, rec: Recommendation, models: Mapping[str, object]):
        self.rec, self.models = rec, models

    def predict(self, X):
        return combined_predict(self.rec, self.models, X)


def render_table(reports: Sequence[EvalReport], rec: Recommendation | None = None) -> str:
    """Plain-text comparison: one block per parameter, one row per model."""
    lines = []
    width = max(8, *(len(r.model_name) for r in reports))
    for p, unit in zip(PARAM_NAMES, PARAM_UNITS):
        lines.append(f"{p.capitalize()} ({unit})")
        lines.append(f"  {'model':<{width}}  {'MAE':>12}  {'accuracy':>9}")
        for r in reports:
            s = r.scores[p]
            lines.append(f"  {r.model_name:<{width}}  {s.mae:>12.4f}  {100 * s.accuracy:>8.1f}%")
        lines.append("")
    if rec is not None:
        lines.append("Recommended combination")
        for p in PARAM_NAMES:
            c = rec.choices[p]
            lines.append(f"  {p:<10} {c.model_name:<{width}}  accuracy {100 * c.accuracy:.1f}%  MAE {c.mae:.4f}")
    return "\n".join(lines).rstrip() + "\n"
