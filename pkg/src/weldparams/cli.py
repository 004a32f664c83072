"""Command line front end: convert, synth, train, predict, evaluate, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (N_SLOTS, PARAM_NAMES, WIRE_COLUMNS, Dataset, GeneratorParams, InvalidRecordError,
                      WireVector, _column_index, _read_rows, _to_float, convert_raw, ingest_csv,
                      noise_for_range, split, synthesize, write_csv)
from .evaluation import evaluate, recommend, render_table
from .linear_model import fit_mlr
from .nn.network import CnnConfig, MlpConfig, TrainingDivergedError, train
from .persistence import ArtifactError, load_document, from_document, overlapping_rows, save_model
from .svr import SvrHyperParams, fit_svr

log = logging.getLogger("weldparams")

KINDS = ("mlr", "svr", "mlp", "cnn")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    data: str | None = None
    synth: dict | None = None  # {"n": ..., "seed": ..., "noise_frac": ..., "params": {...}}
    test_count: int = 10
    split_seed: int = 0
    seed: int = 0
    out_dir: str = "weldparams-out"
    mlr: dict = field(default_factory=dict)
    svr: dict = field(default_factory=dict)
    mlp: dict = field(default_factory=dict)
    cnn: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        raw = dict(raw)
        split_block = raw.pop("split", {}) or {}
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg = cls(**raw)
        if "test_count" in split_block:
            cfg.test_count = int(split_block["test_count"])
        if "seed" in split_block:
            cfg.split_seed = int(split_block["seed"])
        return cfg

    def check_source(self) -> None:
        if (self.data is None) == (self.synth is None):
            raise UsageError("give exactly one data source: a dataset path or a synth spec")


def model_settings(kind: str, cfg: RunConfig, args) -> dict:
    """Built-in defaults, overridden by the config file, then by flags."""
    settings = dict(getattr(cfg, kind))
    flag_map = {
        "svr": {"C": "c", "epsilon": "epsilon", "gamma": "gamma", "kkt_tol": "kkt_tol", "max_passes": "max_passes"},
        "mlp": {"epochs": "epochs", "batch_size": "batch_size", "lr": "learning_rate", "dropout": "dropout_p",
                "hidden_width": "hidden_width", "input_width": "input_width"},
        "cnn": {"epochs": "epochs", "batch_size": "batch_size", "lr": "learning_rate", "dropout": "dropout_p",
                "augment_k": "augment_k", "scale_max": "scale_max"},
        "mlr": {"ridge": "ridge"},
    }[kind]
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            settings[key] = val
    return settings


def build_settings(kind: str, settings: dict, seed: int, n_train: int):
    """Validated hyperparameter object for ``kind``; bad values are usage errors."""
    try:
        if kind == "mlr":
            unknown = set(settings) - {"ridge"}
            if unknown:
                raise UsageError(f"unknown mlr settings {sorted(unknown)}")
            ridge = settings.get("ridge")
            if ridge is not None and not ridge >= 0:
                raise UsageError("ridge must be >= 0")
            return ridge
        if kind == "svr":
            return SvrHyperParams(**settings)
        if kind == "mlp":
            cfg = MlpConfig(**{**settings, "seed": seed})
            return replace(cfg, batch_size=min(cfg.batch_size, n_train))
        if kind == "cnn":
            return CnnConfig(**{**settings, "seed": seed})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad {kind} settings: {exc}") from exc
    raise UsageError(f"unknown model kind {kind!r}")


def fit_model(kind: str, train_set: Dataset, settings: dict, seed: int):
    hp = build_settings(kind, settings, seed, len(train_set))
    if kind == "mlr":
        return fit_mlr(train_set, ridge=hp)
    if kind == "svr":
        return fit_svr(train_set, hp)
    return train(hp, train_set, seed=seed)


def training_summary(kind: str, model, n: int) -> str:
    if kind == "mlr":
        return f"mlr: fitted on {n} records, ridge={model.ridge:.3g}"
    if kind == "svr":
        parts = [f"{p} {it} iterations{'' if ok else ' (NOT converged)'}"
                 for p, it, ok in zip(PARAM_NAMES, model.n_iter, model.converged)]
        hp = model.hp
        return (f"svr: C={hp.c:g} epsilon={hp.epsilon:g} gamma={hp.gamma:g} on {n} records; "
                + ", ".join(parts) + f"; converged={all(model.converged)}")
    return f"{kind}: {model.n_iter} SGD iterations, final training loss {model.loss_history[-1]:.6g}"


def format_prediction(kind: str, pred) -> str:
    if kind == "cnn":
        return "  ".join(f"{v:.6g}" for v in pred)
    return "  ".join(f"{v:.2f}" for v in pred)


def load_source(cfg: RunConfig) -> Dataset:
    cfg.check_source()
    if cfg.data is not None:
        return ingest_csv(cfg.data)
    spec = dict(cfg.synth)
    n = int(spec.pop("n", 300))
    seed = int(spec.pop("seed", cfg.seed))
    frac = spec.pop("noise_frac", None)
    try:
        params = GeneratorParams.from_dict(spec.pop("params", {}) or {})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad synth params: {exc}") from exc
    if spec:
        raise UsageError(f"unknown synth keys {sorted(spec)}")
    if n < 2:
        raise UsageError("synth n must be >= 2")
    if frac is not None:
        params = params.with_noise(noise_for_range(n, params, seed, float(frac)))
    return synthesize(n, params, seed)


# ---------------------------------------------------------------------------
# commands


def cmd_convert(args, cfg: RunConfig) -> int:
    ds = convert_raw(args.raw)
    write_csv(ds, args.out)
    for row, why in ds.rejected:
        print(f"rejected row {row}: {why}", file=sys.stderr)
    print(f"converted {len(ds)} records ({len(ds.rejected)} rejected) -> {args.out}")
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    params = GeneratorParams()
    if args.params:
        try:
            params = GeneratorParams.from_dict(json.loads(Path(args.params).read_text(encoding="utf-8")))
        except (OSError, TypeError, ValueError) as exc:
            raise UsageError(f"bad generator parameter file: {exc}") from exc
    if args.noise_frac is not None:
        params = params.with_noise(noise_for_range(args.n, params, cfg.seed, args.noise_frac))
    ds = synthesize(args.n, params, cfg.seed)
    write_csv(ds, args.out)
    print(f"wrote {len(ds)} synthetic records (seed {cfg.seed}) -> {args.out}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    ds = ingest_csv(args.data)
    settings = model_settings(args.kind, cfg, args)
    model = fit_model(args.kind, ds, settings, cfg.seed)
    out = args.output or str(Path(cfg.out_dir) / f"{args.kind}.json")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out, seed=cfg.seed, train_set=ds)
    print(training_summary(args.kind, model, len(ds)))
    print(f"model -> {out}")
    return 0


def _read_wire_csv(path: str) -> tuple[list[np.ndarray], list[tuple[int, str]]]:
    header, rows = _read_rows(path)
    cols = _column_index(header, WIRE_COLUMNS, path)
    good, bad = [], []
    for lineno, row in enumerate(rows, start=2):
        if not any(c.strip() for c in row):
            continue
        try:
            good.append(WireVector(tuple(_to_float(row[c]) for c in cols)).as_array())
        except (ValueError, IndexError) as exc:
            bad.append((lineno, str(exc)))
    return good, bad


def cmd_predict(args, cfg: RunConfig) -> int:
    doc = load_document(args.model)
    model = from_document(doc)
    kind = doc["model_kind"]
    rejected: list[tuple[int, str]] = []
    if args.wires is not None:
        try:
            secs = [float(s) for s in args.wires.replace(";", ",").split(",") if s.strip()]
            if len(secs) > N_SLOTS:
                raise InvalidRecordError(f"at most {N_SLOTS} wires")
            vectors = [WireVector.from_sections(secs).as_array()]
        except ValueError as exc:
            raise UsageError(f"--wires: {exc}") from exc
    else:
        vectors, rejected = _read_wire_csv(args.csv)
    for row, why in rejected:
        print(f"rejected row {row}: {why}", file=sys.stderr)
    if vectors:
        preds = np.atleast_2d(model.predict(np.array(vectors)))
        for p in preds:
            print(format_prediction(kind, p))
    return 1 if rejected else 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    doc = load_document(args.model)
    model = from_document(doc)
    ds = ingest_csv(args.data)
    overlap = overlapping_rows(doc, ds)
    if overlap:
        print(f"warning: {overlap} of {len(ds)} evaluation rows were used to train this model", file=sys.stderr)
    report = evaluate(model, ds, name=doc["model_kind"])
    print(render_table([report]), end="")
    if args.residuals:
        report.write_residuals_csv(args.residuals)
    return 0


def cmd_compare(args, cfg: RunConfig) -> int:
    if args.data is not None:
        cfg.data, cfg.synth = args.data, None
    if args.synth is not None:
        cfg.synth = {**(cfg.synth or {}), "n": args.synth}
        cfg.data = None if args.data is None else cfg.data
    if args.noise_frac is not None and cfg.synth is not None:
        cfg.synth["noise_frac"] = args.noise_frac
    if args.test_count is not None:
        cfg.test_count = args.test_count
    ds = load_source(cfg)
    result = run_compare(ds, cfg, args.kinds, args)
    print(result["table"], end="")
    print(f"reports and models -> {cfg.out_dir}")
    return 0


def run_compare(ds: Dataset, cfg: RunConfig, kinds, args=None) -> dict:
    """Shared split, train every kind, evaluate, recommend; write everything to ``cfg.out_dir``."""
    kinds = list(dict.fromkeys(kinds or KINDS))
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise UsageError(f"unknown model kinds {bad}")
    train_set, test_set = split(ds, cfg.test_count, cfg.split_seed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(train_set, out / "train.csv")
    write_csv(test_set, out / "test.csv")
    models, reports, summaries = {}, [], []
    for kind in kinds:
        model = fit_model(kind, train_set, model_settings(kind, cfg, args), cfg.seed)
        models[kind] = model
        summaries.append(training_summary(kind, model, len(train_set)))
        save_model(model, out / f"{kind}.json", seed=cfg.seed, train_set=train_set)
        report = evaluate(model, test_set, name=kind)
        report.write_residuals_csv(out / f"{kind}_residuals.csv")
        for p in PARAM_NAMES:
            report.write_scatter_csv(p, out / f"{kind}_{p}_scatter.csv")
        reports.append(report)
    rec = recommend(reports)
    table = "\n".join(summaries) + "\n\n" + render_table(reports, rec)
    (out / "comparison.txt").write_text(table, encoding="utf-8")
    (out / "recommendation.json").write_text(
        json.dumps({p: asdict(c) for p, c in rec.choices.items()}, indent=1) + "\n", encoding="utf-8")
    return {"train": train_set, "test": test_set, "models": models, "reports": reports,
            "recommendation": rec, "table": table}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random stream")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="directory for models and reports")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="weldparams", parents=[common],
                description="Predict ultrasonic welding parameters from wire cross-sections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("convert", parents=[common], help="raw layout export -> cleaned 16-wire CSV")
    c.add_argument("raw")
    c.add_argument("out")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("-n", type=_positive_int, required=True)
    s.add_argument("--params", help="JSON file with generator parameters")
    s.add_argument("--noise-frac", type=float, help="noise std as a fraction of each label's span")
    s.add_argument("out")

    def model_flags(q):
        g = q.add_argument_group("hyperparameter overrides")
        g.add_argument("--C", type=float)
        g.add_argument("--epsilon", type=float)
        g.add_argument("--gamma", type=float)
        g.add_argument("--kkt-tol", type=float)
        g.add_argument("--max-passes", type=int)
        g.add_argument("--epochs", type=int)
        g.add_argument("--batch-size", type=int)
        g.add_argument("--lr", type=float)
        g.add_argument("--dropout", type=float)
        g.add_argument("--hidden-width", type=int)
        g.add_argument("--input-width", type=int)
        g.add_argument("--augment-k", type=int)
        g.add_argument("--scale-max", type=float)
        g.add_argument("--ridge", type=float)

    t = sub.add_parser("train", parents=[common], help="fit one model and save it")
    t.add_argument("kind", choices=KINDS)
    t.add_argument("data")
    t.add_argument("-o", "--output")
    model_flags(t)

    pr = sub.add_parser("predict", parents=[common], help="predict parameters for new products")
    pr.add_argument("model")
    src = pr.add_mutually_exclusive_group(required=True)
    src.add_argument("--wires", help="comma-separated cross-sections in mm², e.g. 0.35,0.35,1.5")
    src.add_argument("--csv", help="CSV with Wire 1..Wire 16 columns")

    e = sub.add_parser("evaluate", parents=[common], help="score a saved model on a dataset")
    e.add_argument("model")
    e.add_argument("data")
    e.add_argument("--residuals", help="write per-record residuals to this CSV")

    cp = sub.add_parser("compare", parents=[common], help="train, score and combine several models")
    cp.add_argument("data", nargs="?")
    cp.add_argument("--synth", type=_positive_int, help="use N synthetic records instead of a file")
    cp.add_argument("--noise-frac", type=float)
    cp.add_argument("--test-count", type=int)
    cp.add_argument("--kinds", nargs="+", default=None, choices=KINDS)
    model_flags(cp)
    return p


def make_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.split_seed = args.seed
        if cfg.synth is not None:
            cfg.synth["seed"] = args.seed
    if getattr(args, "out_dir", None) is not None:
        cfg.out_dir = args.out_dir
    return cfg


COMMANDS = {
    "convert": cmd_convert,
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = make_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArtifactError, TrainingDivergedError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
