"""Layers with explicit forward/backward passes.

Arrays are NCHW for images and (N, F) for vectors. Every layer keeps what
its backward pass needs from the last forward call. Computation follows the
input dtype, so a network cast to ``np.longdouble`` runs in extended
precision (used by the gradient checker).
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    name = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def astype(self, dtype) -> None:
        for d in (self.params, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)

    def config(self) -> dict:
        return {"type": self.name}


def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Dense(Layer):
    name = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        W = he_uniform(rng, (n_in, n_out), n_in) if rng is not None else np.zeros((n_in, n_out))
        self.params = {"W": W, "b": np.zeros(n_out)}

    def forward(self, x, train, rng=None):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"dense layer expects (N, {self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T

    def output_shape(self, in_shape):
        return (self.n_out,)

    def config(self):
        return {"type": self.name, "n_in": self.n_in, "n_out": self.n_out}


class Conv2D(Layer):
    """3x3 convolution, stride 1, zero "same" padding."""

    name = "conv2d"
    k = 3

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator | None = None):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        shape = (c_out, c_in, self.k, self.k)
        W = he_uniform(rng, shape, c_in * self.k * self.k) if rng is not None else np.zeros(shape)
        self.params = {"W": W, "b": np.zeros(c_out)}

    def forward(self, x, train, rng=None):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ValueError(f"conv layer expects (N, {self.c_in}, H, W), got {x.shape}")
        n, c, h, w = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        # (N, C, H, W, 3, 3) -> (N, H, W, C*9)
        cols = sliding_window_view(xp, (self.k, self.k), axis=(2, 3))
        cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * self.k * self.k)
        self._cols = cols
        self._shape = x.shape
        Wm = self.params["W"].reshape(self.c_out, -1)
        out = cols @ Wm.T + self.params["b"]
        return out.reshape(n, h, w, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, dout):
        n, c, h, w = self._shape
        d = dout.transpose(0, 2, 3, 1).reshape(n * h * w, self.c_out)
        Wm = self.params["W"].reshape(self.c_out, -1)
        self.grads["W"] = (d.T @ self._cols).reshape(self.params["W"].shape)
        self.grads["b"] = d.sum(axis=0)
        dcols = (d @ Wm).reshape(n, h, w, c, self.k, self.k)
        dxp = np.zeros((n, c, h + 2, w + 2), dtype=dout.dtype)
        for di in range(self.k):
            for dj in range(self.k):
                dxp[:, :, di:di + h, dj:dj + w] += dcols[:, :, :, :, di, dj].transpose(0, 3, 1, 2)
        return dxp[:, :, 1:-1, 1:-1]

    def output_shape(self, in_shape):
        return (self.c_out,) + tuple(in_shape[1:])

    def config(self):
        return {"type": self.name, "c_in": self.c_in, "c_out": self.c_out}


class MaxPool2D(Layer):
    """2x2 max pooling, stride 2. Ties route the gradient to the first maximum."""

    name = "maxpool2d"

    def forward(self, x, train, rng=None):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"max pool needs even spatial size, got {x.shape}")
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        self._arg = blocks.argmax(axis=-1)
        self._shape = x.shape
        return np.take_along_axis(blocks, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        n, c, h, w = self._shape
        blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
        np.put_along_axis(blocks, self._arg[..., None], dout[..., None], axis=-1)
        return blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)

    def output_shape(self, in_shape):
        c, h, w = in_shape
        return (c, h // 2, w // 2)


class BatchNorm(Layer):
    """Per-feature (2-D input) or per-channel (4-D input) batch normalization.

    Running statistics follow ``run = momentum * run + (1 - momentum) * batch``
    and replace batch statistics at inference.
    """

    name = "batchnorm"

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels)}

    def _axes(self, x):
        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)
        return (0,), (1, -1)

    def forward(self, x, train, rng=None):
        if x.shape[1] != self.channels:
            raise ValueError(f"batch norm expects {self.channels} channels, got {x.shape}")
        axes, bshape = self._axes(x)
        if train:
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mu
            self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
        else:
            mu = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu.reshape(bshape)) * inv.reshape(bshape)
        self._cache = (xhat, inv, axes, bshape, train)
        self.last_normalized = xhat
        return self.params["gamma"].reshape(bshape) * xhat + self.params["beta"].reshape(bshape)

    def backward(self, dout):
        xhat, inv, axes, bshape, train = self._cache
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"].reshape(bshape)
        if not train:
            return dxhat * inv.reshape(bshape)
        m = dout.size // self.channels
        s1 = dxhat.sum(axis=axes).reshape(bshape)
        s2 = (dxhat * xhat).sum(axis=axes).reshape(bshape)
        return inv.reshape(bshape) / m * (m * dxhat - s1 - xhat * s2)

    def config(self):
        return {"type": self.name, "channels": self.channels, "momentum": self.momentum, "eps": self.eps}


class ReLU(Layer):
    name = "relu"

    def forward(self, x, train, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0).astype(x.dtype, copy=False)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0).astype(dout.dtype, copy=False)


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by ``1/(1-p)`` during training."""

    name = "dropout"

    def __init__(self, p: float):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout p must be in [0, 1)")
        self.p = p
        self.fixed_mask: np.ndarray | None = None

    def forward(self, x, train, rng=None):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if self.fixed_mask is not None:
            mask = self.fixed_mask
        else:
            if rng is None:
                raise ValueError("dropout in train mode needs a random generator")
            mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        self._mask = mask.astype(x.dtype)
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask

    def config(self):
        return {"type": self.name, "p": self.p}


class Flatten(Layer):
    name = "flatten"

    def forward(self, x, train, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


LAYER_TYPES = {cls.name: cls for cls in (Dense, Conv2D, MaxPool2D, BatchNorm, ReLU, Dropout, Flatten)}


def layer_from_config(cfg: dict) -> Layer:
    cfg = dict(cfg)
    cls = LAYER_TYPES[cfg.pop("type")]
    return cls(**cfg)
