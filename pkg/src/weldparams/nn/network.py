"""Sequential networks, the MLP/CNN configurations and the SGD training loop."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dataset import N_SLOTS, Dataset
from ..image_encoding import build_image_dataset, encode_batch
from .layers import (BatchNorm, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, ReLU,
                     layer_from_config)

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


class Network:
    def __init__(self, layers: list[Layer], input_shape: tuple):
        self.layers = layers
        self.input_shape = tuple(input_shape)

    def forward(self, x: np.ndarray, mode: str = "infer", rng: np.random.Generator | None = None) -> np.ndarray:
        if mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
        if tuple(x.shape[1:]) != self.input_shape:
            raise ValueError(f"expected input shape (N, {self.input_shape}), got {x.shape}")
        train = mode == "train"
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def shapes(self) -> list[tuple]:
        """Per-layer output shapes (batch axis excluded)."""
        out, s = [], self.input_shape
        for layer in self.layers:
            s = layer.output_shape(s)
            out.append(tuple(s))
        return out

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{i}.{name}", layer, name, p

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": g for i, layer in enumerate(self.layers) for k, g in layer.grads.items()}

    def astype(self, dtype) -> "Network":
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def state(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": [
                {
                    "config": layer.config(),
                    "params": {k: v.tolist() for k, v in layer.params.items()},
                    "buffers": {k: v.tolist() for k, v in layer.buffers.items()},
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_state(cls, state: dict) -> "Network":
        layers = []
        for entry in state["layers"]:
            layer = layer_from_config(entry["config"])
            for k, v in entry["params"].items():
                layer.params[k] = np.array(v, dtype=float)
            for k, v in entry["buffers"].items():
                layer.buffers[k] = np.array(v, dtype=float)
            layers.append(layer)
        return cls(layers, tuple(state["input_shape"]))


# ---------------------------------------------------------------------------
# losses


def mse(pred, target):
    d = pred - target
    return (d * d).mean(), 2.0 * d / d.size


def mae(pred, target):
    d = pred - target
    return np.abs(d).mean(), np.sign(d) / d.size


LOSSES = {"mse": mse, "mae": mae}


def loss_and_grads(net: Network, x, y, loss: str = "mse", rng=None, scale: float = 1.0):
    """Train-mode forward, loss, and backward; gradients land in ``layer.grads``."""
    if y.shape[0] != x.shape[0]:
        raise ValueError("batch and target sizes differ")
    pred = net.forward(x, "train", rng)
    if pred.shape != y.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {y.shape}")
    value, dpred = LOSSES[loss](pred, y)
    net.backward(scale * dpred)
    return scale * value


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class MlpConfig:
    input_width: int = N_SLOTS
    hidden_width: int = 128
    hidden_count: int = 1
    output_width: int = 3
    activation: str = "relu"
    learning_rate: float = 0.003
    dropout_p: float = 0.35
    optimizer: str = "sgd"
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    loss: str = "mse"

    kind = "mlp"

    def __post_init__(self):
        if min(self.input_width, self.hidden_width, self.hidden_count, self.output_width) < 1:
            raise ValueError("layer widths and counts must be >= 1")
        _check_common(self)
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")


@dataclass(frozen=True)
class CnnConfig:
    image_size: int = 16
    conv1_filters: int = 8
    conv2_filters: int = 16
    fc_width: int = 128
    output_width: int = 3
    dropout_p: float = 0.35
    learning_rate: float = 0.003
    optimizer: str = "sgd"
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    loss: str = "mse"
    augment_k: int = 6
    scale_max: float = 6.0

    kind = "cnn"

    def __post_init__(self):
        if min(self.conv1_filters, self.conv2_filters, self.fc_width, self.output_width) < 1:
            raise ValueError("layer widths must be >= 1")
        if self.image_size != 16:
            raise ValueError("only 16x16 inputs are supported")
        if self.augment_k < 0:
            raise ValueError("augment_k must be >= 0")
        if not self.scale_max > 0:
            raise ValueError("scale_max must be > 0")
        _check_common(self)


def _check_common(cfg):
    if not 0.0 <= cfg.dropout_p < 1.0:
        raise ValueError("dropout_p must be in [0, 1)")
    if not cfg.learning_rate > 0:
        raise ValueError("learning_rate must be > 0")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    if cfg.optimizer != "sgd":
        raise ValueError("only plain SGD is supported")
    if cfg.loss not in LOSSES:
        raise ValueError(f"loss must be one of {sorted(LOSSES)}")


def config_from_dict(kind: str, d: dict):
    cls = {"mlp": MlpConfig, "cnn": CnnConfig}[kind]
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown {kind} settings {sorted(unknown)}")
    return cls(**d)


def build_mlp(cfg: MlpConfig, rng: np.random.Generator | None = None) -> Network:
    layers: list[Layer] = []
    width = cfg.input_width
    for _ in range(cfg.hidden_count):
        layers += [Dense(width, cfg.hidden_width, rng), ReLU()]
        width = cfg.hidden_width
    layers += [Dropout(cfg.dropout_p), Dense(width, cfg.output_width, rng)]
    return Network(layers, (cfg.input_width,))


def build_cnn(cfg: CnnConfig, rng: np.random.Generator | None = None) -> Network:
    s = cfg.image_size
    flat = cfg.conv2_filters * (s // 2) * (s // 2)
    layers = [
        Conv2D(1, cfg.conv1_filters, rng), BatchNorm(cfg.conv1_filters), ReLU(),
        Conv2D(cfg.conv1_filters, cfg.conv2_filters, rng), BatchNorm(cfg.conv2_filters), ReLU(),
        MaxPool2D(), Dropout(cfg.dropout_p), Flatten(),
        Dense(flat, cfg.fc_width, rng), ReLU(),
        Dense(cfg.fc_width, cfg.output_width, rng), ReLU(),
    ]
    return Network(layers, (1, s, s))


def build_network(cfg, rng=None) -> Network:
    return build_mlp(cfg, rng) if cfg.kind == "mlp" else build_cnn(cfg, rng)


# ---------------------------------------------------------------------------
# trained model


@dataclass(eq=False)
class TrainedNet:
    """A trained MLP or CNN plus the target transform it was trained with.

    Targets are fed to the net as ``(y - shift) / scale``. The MLP centres
    them (shift = mean); the CNN ends in a ReLU, so it only rescales
    (shift = 0) and keeps all training targets positive.
    """

    config: MlpConfig | CnnConfig
    network: Network
    target_shift: np.ndarray
    target_scale: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    valid_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def kind(self) -> str:
        return self.config.kind

    def prepare(self, X) -> np.ndarray:
        """Map wire vectors (or ready images for the CNN) to network input."""
        X = np.asarray(X, dtype=float)
        if self.kind == "cnn":
            if X.ndim == 1:
                X = X[None, :]
            if X.ndim == 2 and X.shape[1] == N_SLOTS:
                return encode_batch(X, self.config.scale_max)[:, None, :, :]
            if X.ndim == 2 and X.shape == (16, 16):
                X = X[None]
            if X.ndim == 3:
                X = X[:, None]
            return X
        return mlp_inputs(np.atleast_2d(X), self.config.input_width)

    def predict(self, X, batch: int = 512) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1 or (self.kind == "cnn" and X.ndim == 2 and X.shape == (16, 16))
        Z = self.prepare(X)
        if not np.all(np.isfinite(Z)):
            raise ValueError("non-finite input")
        outs = [self.network.forward(Z[k:k + batch], "infer") for k in range(0, Z.shape[0], batch)]
        out = np.concatenate(outs) * self.target_scale + self.target_shift
        return out[0] if single else out


def mlp_inputs(X: np.ndarray, width: int) -> np.ndarray:
    """Fit canonical 16-slot vectors to the MLP input width (zero-pad or drop empty tail slots)."""
    if width >= X.shape[1]:
        return np.pad(X, ((0, 0), (0, width - X.shape[1])))
    if np.any(X[:, width:] != 0):
        raise ValueError(f"record has more than {width} wires, the MLP input width")
    return X[:, :width]


def target_transform(kind: str, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = Y.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    if kind == "cnn":
        # ReLU output: rescale only
        return np.zeros(Y.shape[1]), scale
    return Y.mean(axis=0), scale


def _training_arrays(cfg, ds: Dataset, seed: int):
    if cfg.kind == "cnn":
        images, labels = build_image_dataset(ds, cfg.augment_k, cfg.scale_max, seed)
        return images[:, None, :, :], labels
    return mlp_inputs(np.asarray(ds.X, dtype=float), cfg.input_width), np.asarray(ds.Y, dtype=float)


def train(config: MlpConfig | CnnConfig, train_set: Dataset, valid_set: Dataset | None = None,
          seed: int | None = None) -> TrainedNet:
    """Plain minibatch SGD on the MSE (or MAE) of transformed targets.

    Deterministic given ``(config, data, seed)``; ``seed`` defaults to
    ``config.seed``.
    """
    seed = config.seed if seed is None else seed
    if config.batch_size > len(train_set) and config.kind == "mlp":
        raise ValueError(f"batch_size {config.batch_size} exceeds {len(train_set)} training records")
    init_ss, shuffle_ss, drop_ss, aug_ss = np.random.SeedSequence(seed).spawn(4)
    aug_seed = int(aug_ss.generate_state(1)[0])
    X, Y = _training_arrays(config, train_set, aug_seed)
    shift, scale = target_transform(config.kind, Y)
    T = (Y - shift) / scale

    net = build_network(config, np.random.default_rng(init_ss))
    # start the output layer at the mean target
    out_dense = [layer for layer in net.layers if isinstance(layer, Dense)][-1]
    out_dense.params["b"] = T.mean(axis=0).copy()

    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)
    has_bn = any(isinstance(layer, BatchNorm) for layer in net.layers)
    n = X.shape[0]
    bs = min(config.batch_size, n)
    lr = config.learning_rate
    history, valid_history, n_iter = [], [], 0
    valid = None
    if valid_set is not None:
        Xv = np.asarray(valid_set.X, dtype=float)
        valid = (Xv, (np.asarray(valid_set.Y) - shift) / scale)

    model = TrainedNet(config, net, shift, scale, history, valid_history)
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            if has_bn and idx.size < 2:
                continue
            with np.errstate(over="ignore", invalid="ignore"):  # caught by the guard below
                value = loss_and_grads(net, X[idx], T[idx], config.loss, drop_rng)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, iteration {n_iter} (lr={lr})")
            for _, layer, name, p in net.parameters():
                p -= lr * layer.grads[name]
            total += value * idx.size
            n_iter += 1
        history.append(total / n)
        if valid is not None:
            pred = (model.predict(valid[0]) - shift) / scale
            valid_history.append(float(np.mean((pred - valid[1]) ** 2)))
    model.n_iter = n_iter
    log.info("%s trained: %d iterations, final loss %.6g", config.kind, n_iter, history[-1])
    return model


def predict_net(net: TrainedNet, x) -> np.ndarray:
    return net.predict(x)


def config_to_dict(cfg) -> dict:
    return asdict(cfg)
