"""Ultrasonic-welding process parameter prediction.

Four regressors (linear, ε-SVR, MLP, CNN) map a node's wire cross-sections
to energy, amplitude and pressure; a per-parameter combination picks the
best one for each output.
"""

__version__ = "0.1.0"

from ._smo_backend import BACKEND as SMO_BACKEND
from .dataset import (Dataset, GeneratorParams, ParamTriple, WireVector, build_wire_vector, ingest_csv,
                      parse_layout, split, synthesize, write_csv)
from .evaluation import evaluate, mae, recommend, tolerance_accuracy
from .linear_model import LinearModel, fit_mlr
from .persistence import load_model, save_model
from .svr import SvrHyperParams, SvrModel, fit_svr

__all__ = [
    "SMO_BACKEND", "Dataset", "GeneratorParams", "ParamTriple", "WireVector", "build_wire_vector",
    "ingest_csv", "parse_layout", "split", "synthesize", "write_csv", "evaluate", "mae", "recommend",
    "tolerance_accuracy", "LinearModel", "fit_mlr", "load_model", "save_model", "SvrHyperParams",
    "SvrModel", "fit_svr",
]
