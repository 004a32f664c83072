"""Central finite-difference checks for layers and whole networks.

Checks run in ``np.longdouble`` so rounding stays far below the truncation
error of the difference quotient.
"""
from __future__ import annotations

import numpy as np

from .layers import Layer
from .network import LOSSES, Network, loss_and_grads

EXT = np.longdouble


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-10) -> float:
    """``||a - n|| / max(||a||, ||n||, atol)``.

    The floor matters for gradients that are exactly zero, e.g. a conv bias
    followed by batch norm.
    """
    a = np.asarray(analytic, dtype=EXT).ravel()
    n = np.asarray(numeric, dtype=EXT).ravel()
    denom = max(np.linalg.norm(a.astype(float)), np.linalg.norm(n.astype(float)), atol)
    return float(np.linalg.norm((a - n).astype(float)) / denom)


def numeric_grad(fn, x: np.ndarray, h: float = 1e-4, indices=None) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. entries of ``x`` (mutated in place, restored)."""
    grad = np.zeros(x.shape, dtype=EXT)
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = fn()
        flat[i] = old - h
        fm = fn()
        flat[i] = old
        grad.reshape(-1)[i] = (fp - fm) / (2 * h)
    return grad


def _sample(size: int, limit: int | None, rng) -> np.ndarray:
    if limit is None or size <= limit:
        return np.arange(size)
    return np.sort(rng.choice(size, limit, replace=False))


def check_layer(layer: Layer, x: np.ndarray, h: float = 1e-4, train: bool = True, seed: int = 0) -> dict[str, float]:
    """Relative errors of input and parameter gradients for ``sum(w * layer(x))``."""
    layer.astype(EXT)
    x = np.array(x, dtype=EXT)
    out = layer.forward(x, train)
    w = np.random.default_rng(seed).standard_normal(out.shape).astype(EXT)

    def fn():
        return (w * layer.forward(x, train)).sum()

    layer.forward(x, train)
    dx = layer.backward(w)
    grads = {k: g.copy() for k, g in layer.grads.items()}
    errors = {"input": relative_error(dx, numeric_grad(fn, x, h))}
    for name, p in layer.params.items():
        errors[name] = relative_error(grads[name], numeric_grad(fn, p, h))
    return errors


def check_network(net: Network, x: np.ndarray, y: np.ndarray, loss: str = "mse", h: float = 1e-4,
                  max_entries: int | None = 40, seed: int = 0) -> dict[str, float]:
    """Relative error per parameter tensor of ``loss(net(x), y)`` in train mode.

    Dropout layers must be disabled (p=0) or given a ``fixed_mask``. At most
    ``max_entries`` entries per tensor are differenced (all when None).
    """
    net.astype(EXT)
    x = np.array(x, dtype=EXT)
    y = np.array(y, dtype=EXT)
    rng = np.random.default_rng(seed)
    loss_fn = LOSSES[loss]

    def fn():
        return loss_fn(net.forward(x, "train"), y)[0]

    loss_and_grads(net, x, y, loss)
    analytic = {k: g.copy() for k, g in net.gradients().items()}
    errors = {}
    for key, _layer, _name, p in net.parameters():
        idx = _sample(p.size, max_entries, rng)
        num = numeric_grad(fn, p, h, idx)
        errors[key] = relative_error(analytic[key].reshape(-1)[idx], num.reshape(-1)[idx])
    return errors
