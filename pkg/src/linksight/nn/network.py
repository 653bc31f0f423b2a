"""Network state, forward/backward passes and weighted mini-batch training."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import ops
from .config import NetworkConfig


class ShapeError(ValueError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int | None = None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


@dataclass
class NetworkState:
    weights: list  # per layer: ndarray or None
    biases: list

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases) if w is not None)

    @property
    def dtype(self):
        for w in self.weights:
            if w is not None:
                return w.dtype
        return np.dtype(np.float64)

    def copy(self) -> "NetworkState":
        return NetworkState(
            [None if w is None else w.copy() for w in self.weights],
            [None if b is None else b.copy() for b in self.biases],
        )

    def astype(self, dtype) -> "NetworkState":
        return NetworkState(
            [None if w is None else w.astype(dtype) for w in self.weights],
            [None if b is None else b.astype(dtype) for b in self.biases],
        )


def param_shapes(config: NetworkConfig) -> list:
    shapes = config.shapes()
    out = []
    for layer, shape_in in zip(config.layers, shapes[:-1]):
        if layer.kind == "conv":
            kr, kc = layer.kernel
            out.append(((kr, kc, shape_in[2], layer.filters), (layer.filters,)))
        elif layer.kind in ("dense", "output"):
            out.append(((shape_in[0], layer.units), (layer.units,)))
        else:
            out.append(None)
    return out


def init_state(config: NetworkConfig, seed: int = 0, dtype=np.float64) -> NetworkState:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for shapes in param_shapes(config):
        if shapes is None:
            weights.append(None)
            biases.append(None)
            continue
        wshape, bshape = shapes
        if len(wshape) == 4:
            kr, kc, cin, cout = wshape
            fan_in, fan_out = kr * kc * cin, kr * kc * cout
        else:
            fan_in, fan_out = wshape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=wshape).astype(dtype))
        biases.append(np.zeros(bshape, dtype=dtype))
    return NetworkState(weights, biases)


def zero_state(config: NetworkConfig, dtype=np.float64) -> NetworkState:
    st = init_state(config, 0, dtype)
    return NetworkState(
        [None if w is None else np.zeros_like(w) for w in st.weights],
        [None if b is None else np.zeros_like(b) for b in st.biases],
    )


def _as_batch(config: NetworkConfig, images, dtype) -> np.ndarray:
    x = np.asarray(images, dtype=dtype)
    n, c = config.input_size, config.channels
    if x.shape == (n, n):
        x = x[None, :, :, None]
    elif x.shape == (n, n, c):
        x = x[None]
    elif x.ndim == 3 and x.shape[1:] == (n, n) and c == 1:
        x = x[..., None]
    elif x.ndim != 4 or x.shape[1:] != (n, n, c):
        raise ShapeError(f"expected image(s) of shape ({n}, {n}, {c}), got {x.shape}")
    return x


def _check_state(state: NetworkState, config: NetworkConfig) -> None:
    for i, (shapes, w, b) in enumerate(zip(param_shapes(config), state.weights, state.biases)):
        if shapes is None:
            if w is not None:
                raise ShapeError(f"layer {i} carries weights but has none in the config")
            continue
        if w is None or w.shape != shapes[0] or b.shape != shapes[1]:
            raise ShapeError(f"layer {i}: state does not match config")
    if len(state.weights) != len(config.layers):
        raise ShapeError("state and config differ in layer count")


def forward_pass(state: NetworkState, config: NetworkConfig, x: np.ndarray):
    """Run a batch through the network; returns (logits, per-layer caches)."""
    caches = []
    a = x
    for layer, w, b in zip(config.layers, state.weights, state.biases):
        if layer.kind == "conv":
            z, cache = ops.conv_forward(a, w, b, layer.stride, layer.padding)
        elif layer.kind == "maxpool":
            z, cache = ops.maxpool_forward(a, layer.kernel, layer.stride)
        elif layer.kind == "flatten":
            z, cache = a.reshape(a.shape[0], -1), a.shape
        else:
            z, cache = a @ w + b, a
        caches.append((cache, z))
        a = np.maximum(z, 0) if layer.activation == "relu" else z
    return a, caches


# probe(layer_index, pre_activation, gradient_after_relu)
Probe = Callable[[int, np.ndarray, np.ndarray], None]


def backward_pass(state: NetworkState, config: NetworkConfig, caches, dlogits,
                  guided: bool = False, probe: Probe | None = None, need_input_grad=False):
    """Backpropagate ``dlogits``; returns (weight grads, bias grads, input grad).

    With ``guided`` every ReLU also blocks negative incoming gradient.
    """
    n = len(config.layers)
    dws, dbs = [None] * n, [None] * n
    d = dlogits
    for i in range(n - 1, -1, -1):
        layer = config.layers[i]
        cache, z = caches[i]
        if layer.activation == "relu":
            mask = z > 0
            if guided:
                mask &= d > 0
            d = d * mask
            if probe is not None:
                probe(i, z, d)
        need_dx = i > 0 or need_input_grad
        if layer.kind == "conv":
            d, dws[i], dbs[i] = ops.conv_backward(d, state.weights[i], cache, layer.stride,
                                                   layer.padding, need_dx=need_dx)
        elif layer.kind == "maxpool":
            d = ops.maxpool_backward(d, cache, layer.kernel, layer.stride)
        elif layer.kind == "flatten":
            d = d.reshape(cache)
        else:
            a = cache
            dws[i] = a.T @ d
            dbs[i] = d.sum(axis=0)
            d = d @ state.weights[i].T if need_dx else None
    return dws, dbs, d


def predict_scores(state: NetworkState, config: NetworkConfig, images, batch_size: int = 64) -> np.ndarray:
    """Sigmoid scores, shape (B, num_classes)."""
    x = _as_batch(config, images, state.dtype)
    _check_state(state, config)
    out = []
    for lo in range(0, len(x), batch_size):
        logits, _ = forward_pass(state, config, x[lo:lo + batch_size])
        out.append(ops.sigmoid(logits))
    return np.concatenate(out) if out else np.empty((0, config.num_classes))


def forward(state: NetworkState, config: NetworkConfig, image) -> np.ndarray:
    """Class scores of a single image, each in [0, 1]."""
    x = np.asarray(image)
    n = config.input_size
    if x.shape not in ((n, n), (n, n, config.channels)):
        raise ShapeError(f"expected image of shape ({n}, {n}, {config.channels}), got {x.shape}")
    return predict_scores(state, config, x)[0]


def decide(scores: np.ndarray) -> np.ndarray:
    """Class index per row: argmax, or threshold 0.5 for a single output."""
    scores = np.atleast_2d(scores)
    if scores.shape[1] == 1:
        return (scores[:, 0] >= 0.5).astype(np.int64)
    return scores.argmax(axis=1)


def predict(state, config, images, batch_size: int = 64) -> np.ndarray:
    return decide(predict_scores(state, config, images, batch_size))


DEFAULT_CLASS_WEIGHTS = (0.1, 1.0, 1.0, 1.0, 1.0)


def default_class_weights(num_classes: int) -> np.ndarray:
    return np.array(DEFAULT_CLASS_WEIGHTS[: max(num_classes, 2)])


def targets_for(labels, num_classes: int) -> np.ndarray:
    """Label indices -> sigmoid targets (binary: anomalous vs not; else one-hot)."""
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes == 1:
        return (labels != 0).astype(np.float64)[:, None]
    t = np.zeros((len(labels), num_classes))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def weighted_bce(logits: np.ndarray, labels, class_weights, num_classes: int):
    """Mean over the batch of ``w[label] * mean_k BCE(sigmoid(z_k), t_k)``.

    Returns (loss, dloss/dlogits). Class weights are indexed by label, so a
    binary model uses two weights (normal, anomalous).
    """
    labels = np.asarray(labels, dtype=np.int64)
    cw = np.asarray(class_weights, dtype=np.float64)
    if num_classes == 1:
        wi = (labels != 0).astype(np.int64)
    else:
        wi = labels
    if wi.max(initial=0) >= len(cw):
        raise ValueError(f"class_weights has {len(cw)} entries, labels need more")
    t = targets_for(labels, num_classes).astype(logits.dtype)
    w = cw[wi].astype(logits.dtype)[:, None]
    bsz, k = logits.shape
    per = np.logaddexp(0, logits) - t * logits
    loss = float((w * per).sum() / (bsz * k))
    grad = w * (ops.sigmoid(logits) - t) / (bsz * k)
    return loss, grad


def loss_and_gradients(state, config, images, labels, class_weights):
    x = _as_batch(config, images, state.dtype)
    logits, caches = forward_pass(state, config, x)
    loss, dlogits = weighted_bce(logits, labels, class_weights, config.num_classes)
    dws, dbs, _ = backward_pass(state, config, caches, dlogits)
    return loss, dws, dbs


def gradients(state: NetworkState, config: NetworkConfig, images, targets,
              class_weights=None) -> NetworkState:
    """Exact gradients of the weighted loss, in the layout of ``state``."""
    _check_state(state, config)
    labels = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if class_weights is None:
        class_weights = default_class_weights(config.num_classes)
    _, dws, dbs = loss_and_gradients(state, config, images, labels, class_weights)
    return NetworkState(dws, dbs)


def loss(state, config, images, labels, class_weights=None) -> float:
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if class_weights is None:
        class_weights = default_class_weights(config.num_classes)
    x = _as_batch(config, images, state.dtype)
    logits, _ = forward_pass(state, config, x)
    return weighted_bce(logits, labels, class_weights, config.num_classes)[0]


def train(state: NetworkState, config: NetworkConfig, images, labels,
          class_weights=None, epochs: int = 10, learning_rate: float = 1e-3,
          batch_size: int = 32, seed: int = 0, momentum: float = 0.0,
          callback: Callable[[int, float], None] | None = None):
    """Mini-batch gradient descent on the class-weighted sigmoid cross-entropy.

    Returns ``(trained_state, loss_history)``; the input state is untouched.
    ``loss_history[e]`` is the sample-averaged training loss seen during
    epoch ``e``. ``momentum=0`` is plain gradient descent.
    """
    _check_state(state, config)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise TrainingError("empty training set")
    x = _as_batch(config, images, state.dtype)
    if len(x) != len(labels):
        raise ShapeError(f"{len(x)} images but {len(labels)} labels")
    if class_weights is None:
        class_weights = default_class_weights(config.num_classes)
    if batch_size < 1 or epochs < 0:
        raise ValueError("batch_size must be >= 1 and epochs >= 0")

    st = state.copy()
    velocity = [None if w is None else (np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(st.weights, st.biases)]
    rng = np.random.default_rng(seed)
    history = []
    n = len(x)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            batch_loss, dws, dbs = loss_and_gradients(st, config, x[idx], labels[idx], class_weights)
            if not np.isfinite(batch_loss):
                raise TrainingError("non-finite loss (diverged)", epoch)
            total += batch_loss * len(idx)
            for i, w in enumerate(st.weights):
                if w is None:
                    continue
                vw, vb = velocity[i]
                vw *= momentum
                vw -= learning_rate * dws[i]
                vb *= momentum
                vb -= learning_rate * dbs[i]
                st.weights[i] = w + vw
                st.biases[i] = st.biases[i] + vb
        history.append(total / n)
        if callback is not None:
            callback(epoch, history[-1])
    return st, history
