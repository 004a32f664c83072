"""Versioned JSON model artifacts.

Floats are written with ``repr`` (shortest round-trip form), so loading
restores the exact binary values and predictions match bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .linear_model import LinearModel
from .nn.network import Network, TrainedNet, config_from_dict, config_to_dict
from .svr import SvrHyperParams, SvrModel

FORMAT_VERSION = 1
KINDS = ("mlr", "svr", "mlp", "cnn")


class ArtifactError(ValueError):
    pass


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def to_document(model, seed: int | None = None, train_set: Dataset | None = None) -> dict:
    kind = model.kind
    doc: dict = {"format_version": FORMAT_VERSION, "model_kind": kind}
    if kind == "mlr":
        doc["hyperparameters"] = {"ridge": model.ridge}
        doc["standardization"] = {"input_mean": _arr(model.input_mean), "input_scale": _arr(model.input_scale)}
        doc["weights"] = {"weights": _arr(model.weights), "intercept": _arr(model.intercept)}
    elif kind == "svr":
        doc["hyperparameters"] = model.hp.to_dict()
        doc["standardization"] = {
            "input_mean": _arr(model.input_mean), "input_scale": _arr(model.input_scale),
            "target_mean": _arr(model.target_mean), "target_scale": _arr(model.target_scale),
        }
        doc["weights"] = {
            "support": [_arr(s) for s in model.support],
            "coef": [_arr(c) for c in model.coef],
            "bias": _arr(model.bias),
        }
        doc["training"] = {"n_iter": list(model.n_iter), "converged": list(model.converged)}
    elif kind in ("mlp", "cnn"):
        doc["hyperparameters"] = config_to_dict(model.config)
        doc["standardization"] = {"target_shift": _arr(model.target_shift), "target_scale": _arr(model.target_scale)}
        doc["weights"] = model.network.state()
        doc["training"] = {"n_iter": model.n_iter, "loss_history": list(model.loss_history)}
    else:
        raise ArtifactError(f"unknown model kind {kind!r}")
    meta: dict = {"seed": seed}
    if train_set is not None:
        meta["dataset_fingerprint"] = train_set.fingerprint()
        meta["train_rows"] = train_set.row_digests()
    doc["metadata"] = meta
    return doc


def from_document(doc: dict):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    kind = doc.get("model_kind")
    hp, st, w = doc["hyperparameters"], doc["standardization"], doc["weights"]
    if kind == "mlr":
        return LinearModel(np.array(w["weights"]), np.array(w["intercept"]),
                           np.array(st["input_mean"]), np.array(st["input_scale"]), ridge=hp["ridge"])
    if kind == "svr":
        d = len(st["input_mean"])
        tr = doc.get("training", {})
        return SvrModel(
            SvrHyperParams(**hp),
            np.array(st["input_mean"]), np.array(st["input_scale"]),
            np.array(st["target_mean"]), np.array(st["target_scale"]),
            tuple(np.array(s, dtype=float).reshape(-1, d) for s in w["support"]),
            tuple(np.array(c, dtype=float) for c in w["coef"]),
            np.array(w["bias"]),
            tuple(tr.get("n_iter", ())), tuple(tr.get("converged", ())),
        )
    if kind in ("mlp", "cnn"):
        tr = doc.get("training", {})
        return TrainedNet(
            config_from_dict(kind, hp), Network.from_state(w),
            np.array(st["target_shift"]), np.array(st["target_scale"]),
            list(tr.get("loss_history", [])), [], int(tr.get("n_iter", 0)),
        )
    raise ArtifactError(f"unknown model kind {kind!r}")


def save_model(model, path: str | Path, seed: int | None = None, train_set: Dataset | None = None) -> dict:
    doc = to_document(model, seed, train_set)
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")
    return doc


def load_document(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not a model artifact ({exc})") from exc


def load_model(path: str | Path):
    return from_document(load_document(path))


def overlapping_rows(doc: dict, ds: Dataset) -> int:
    """How many rows of ``ds`` appear in the artifact's training set."""
    seen = set(doc.get("metadata", {}).get("train_rows", []))
    return sum(1 for d in ds.row_digests() if d in seen)
