"""A small numpy 1-D CNN with hand-written backpropagation.

Architecture: four (conv1d -> maxpool -> relu) blocks, flatten, three dense
layers (the last one has 4 units) and a softmax. Features enter as
(channels = coefficients, length = frames). Everything runs in float64.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, TrainingError

N_CLASSES = 4
CE_EPS = 1e-12
PLATEAU_MIN_DELTA = 1e-4


# ---------------------------------------------------------------- functional ops

def _batched(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise InvalidArgument(f"expected a {ndim - 1}-D or batched {ndim}-D input, got shape {x.shape}")
    return x, False


def conv1d_forward(x, w, b):
    """Valid, stride-1 cross-correlation.

    ``x``: (C_in, L) or (B, C_in, L); ``w``: (C_out, C_in, K); ``b``: (C_out,).
    ``out[o, i] = b[o] + sum_{c, j} w[o, c, j] * x[c, i + j]``.
    """
    xb, single = _batched(x, 3)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 3 or w.shape[1] != xb.shape[1] or b.shape != (w.shape[0],):
        raise InvalidArgument(f"conv1d shape mismatch: input {xb.shape}, weights {w.shape}, bias {b.shape}")
    c_out, c_in, k = w.shape
    if k > xb.shape[2]:
        raise InvalidArgument(f"kernel {k} longer than input length {xb.shape[2]}")
    win = np.lib.stride_tricks.sliding_window_view(xb, k, axis=2)  # (B, C, L_out, K)
    cols = win.transpose(0, 2, 1, 3).reshape(xb.shape[0], -1, c_in * k)
    out = (cols @ w.reshape(c_out, c_in * k).T).transpose(0, 2, 1) + b[None, :, None]
    return out[0] if single else out


def conv1d_backward(g, x, w):
    """Gradients of :func:`conv1d_forward` w.r.t. input, weights and bias."""
    xb, single = _batched(x, 3)
    gb_, _ = _batched(g, 3)
    w = np.asarray(w, dtype=np.float64)
    c_out, c_in, k = w.shape
    l_out = xb.shape[2] - k + 1
    if gb_.shape != (xb.shape[0], c_out, l_out):
        raise InvalidArgument(f"upstream gradient shape {gb_.shape} != {(xb.shape[0], c_out, l_out)}")
    win = np.lib.stride_tricks.sliding_window_view(xb, k, axis=2)
    gw = np.einsum("bol,bclk->ock", gb_, win, optimize=True)
    gbias = gb_.sum(axis=(0, 2))
    gx = np.zeros_like(xb)
    for j in range(k):
        gx[:, :, j:j + l_out] += np.einsum("bol,oc->bcl", gb_, w[:, :, j], optimize=True)
    return (gx[0] if single else gx), gw, gbias


def maxpool1d_forward(x, window=2, stride=2):
    """Max over windows; trailing samples that do not fill a window are dropped.

    Returns ``(out, argmax)`` where ``argmax`` is the first maximising offset in each window.
    """
    xb, single = _batched(x, 3)
    if xb.shape[2] < window:
        raise InvalidArgument(f"input length {xb.shape[2]} shorter than pool window {window}")
    win = np.lib.stride_tricks.sliding_window_view(xb, window, axis=2)[:, :, ::stride]
    arg = win.argmax(axis=3)
    out = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    return (out[0], arg[0]) if single else (out, arg)


def maxpool1d_backward(g, argmax, input_length, window=2, stride=2):
    gb_, single = _batched(g, 3)
    arg = argmax[None] if single else argmax
    b, c, l_out = gb_.shape
    gx = np.zeros((b, c, input_length))
    pos = np.arange(l_out) * stride + arg
    # add.at accumulates when overlapping windows (stride < window) pick the same sample
    np.add.at(gx, (np.arange(b)[:, None, None], np.arange(c)[None, :, None], pos), gb_)
    return gx[0] if single else gx


def dense_forward(x, w, b):
    """``x @ w.T + b`` for ``x`` of shape (n,) or (B, n), ``w`` (m, n)."""
    xb, single = _batched(x, 2)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != xb.shape[1] or np.shape(b) != (w.shape[0],):
        raise InvalidArgument(f"dense shape mismatch: input {xb.shape}, weights {w.shape}, bias {np.shape(b)}")
    out = xb @ w.T + b
    return out[0] if single else out


def dense_backward(g, x, w):
    xb, single = _batched(x, 2)
    gb_, _ = _batched(g, 2)
    gx = gb_ @ w
    return (gx[0] if single else gx), gb_.T @ xb, gb_.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(g, x):
    return g * (x > 0)


def dropout(x, p, training, rng=None):
    """Inverted dropout. Returns ``(out, mask)``; the mask is None in inference mode."""
    if not training or p == 0:
        return x, None
    if not 0 <= p < 1:
        raise InvalidArgument(f"dropout probability must be in [0, 1), got {p}")
    mask = (rng.random(np.shape(x)) >= p) / (1.0 - p)
    return x * mask, mask


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(probs, one_hot):
    """Mean categorical cross-entropy; probabilities are clamped at 1e-12."""
    probs = np.atleast_2d(probs)
    one_hot = np.atleast_2d(one_hot)
    return float(-(one_hot * np.log(np.maximum(probs, CE_EPS))).sum(axis=1).mean())


def one_hot(labels, n_classes=N_CLASSES):
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


# ---------------------------------------------------------------- layers

class Layer:
    kind = "layer"
    params: dict
    grads: dict

    def __init__(self):
        self.params, self.grads = {}, {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError

    def output_shape(self, shape):
        return shape

    def config(self):
        return {}


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, c_in, c_out, kernel):
        super().__init__()
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.params = {"w": np.zeros((c_out, c_in, kernel)), "b": np.zeros(c_out)}

    def init(self, rng):
        limit = np.sqrt(6.0 / (self.c_in * self.kernel))
        self.params["w"] = rng.uniform(-limit, limit, self.params["w"].shape)
        self.params["b"] = np.zeros(self.c_out)

    def forward(self, x, training=False, rng=None):
        self._x = x
        return conv1d_forward(x, self.params["w"], self.params["b"])

    def backward(self, g):
        gx, self.grads["w"], self.grads["b"] = conv1d_backward(g, self._x, self.params["w"])
        return gx

    def output_shape(self, shape):
        c, length = shape
        if c != self.c_in:
            raise InvalidArgument(f"conv1d expects {self.c_in} channels, got {c}")
        if length < self.kernel:
            raise InvalidArgument(f"conv1d kernel {self.kernel} exceeds input length {length}")
        return (self.c_out, length - self.kernel + 1)

    def config(self):
        return {"c_in": self.c_in, "c_out": self.c_out, "kernel": self.kernel}


class MaxPool1D(Layer):
    kind = "maxpool1d"

    def __init__(self, window=2, stride=2):
        super().__init__()
        self.window, self.stride = window, stride

    def forward(self, x, training=False, rng=None):
        self._length = x.shape[-1]
        out, self._arg = maxpool1d_forward(x, self.window, self.stride)
        return out

    def backward(self, g):
        return maxpool1d_backward(g, self._arg, self._length, self.window, self.stride)

    def output_shape(self, shape):
        c, length = shape
        if length < self.window:
            raise InvalidArgument(f"pool window {self.window} exceeds input length {length}")
        return (c, (length - self.window) // self.stride + 1)

    def config(self):
        return {"window": self.window, "stride": self.stride}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False, rng=None):
        self._x = x
        return relu(x)

    def backward(self, g):
        return relu_backward(g, self._x)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, p=0.3):
        super().__init__()
        if not 0 <= p < 1:
            raise InvalidArgument(f"dropout probability must be in [0, 1), got {p}")
        self.p = p

    def forward(self, x, training=False, rng=None):
        out, self._mask = dropout(x, self.p, training, rng)
        return out

    def backward(self, g):
        return g if self._mask is None else g * self._mask

    def config(self):
        return {"p": self.p}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)

    def output_shape(self, shape):
        return (int(np.prod(shape)),)


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = {"w": np.zeros((n_out, n_in)), "b": np.zeros(n_out)}

    def init(self, rng):
        limit = np.sqrt(6.0 / self.n_in)
        self.params["w"] = rng.uniform(-limit, limit, (self.n_out, self.n_in))
        self.params["b"] = np.zeros(self.n_out)

    def forward(self, x, training=False, rng=None):
        self._x = x
        return dense_forward(x, self.params["w"], self.params["b"])

    def backward(self, g):
        gx, self.grads["w"], self.grads["b"] = dense_backward(g, self._x, self.params["w"])
        return gx

    def output_shape(self, shape):
        if shape != (self.n_in,):
            raise InvalidArgument(f"dense expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def config(self):
        return {"n_in": self.n_in, "n_out": self.n_out}


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, training=False, rng=None):
        self._p = softmax(x)
        return self._p

    def backward(self, g):
        p = self._p
        return p * (g - (g * p).sum(axis=-1, keepdims=True))


LAYER_TYPES = {cls.kind: cls for cls in (Conv1D, MaxPool1D, ReLU, Dropout, Flatten, Dense, Softmax)}


# ---------------------------------------------------------------- model

@dataclass(frozen=True)
class ModelHyper:
    conv_channels: tuple = (32, 64, 64, 128)
    kernel: int = 3
    pool: int = 2
    dense: tuple = (256, 128, N_CLASSES)
    dropout_p: float = 0.3


class Model:
    """Ordered layer stack with shape checking at construction."""

    def __init__(self, layers, input_shape, rng_seed=0, hyper: ModelHyper | None = None):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.rng_seed = rng_seed
        self.hyper = hyper
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.output_shape = shape

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise InvalidArgument(f"model expects inputs of shape {self.input_shape}, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def loss_and_grads(self, x, targets, training=False, rng=None):
        """Mean cross-entropy of a batch; parameter gradients are left in each layer's ``grads``."""
        probs = self.forward(x, training, rng)
        loss = cross_entropy(probs, targets)
        if not isinstance(self.layers[-1], Softmax):
            raise InvalidArgument("loss_and_grads needs a model ending in softmax")
        # Fused softmax + cross-entropy gradient w.r.t. the logits.
        g = (probs - targets) / len(x)
        for layer in reversed(self.layers[:-1]):
            g = layer.backward(g)
        return loss, probs

    def parameters(self):
        """(layer index, name, array) for every trainable array, in a fixed order."""
        return [(i, k, layer.params[k]) for i, layer in enumerate(self.layers) for k in sorted(layer.params)]

    def gradients(self):
        return [self.layers[i].grads[k] for i, k, _ in self.parameters()]

    def n_parameters(self) -> int:
        return int(sum(p.size for _, _, p in self.parameters()))

    def copy_parameters(self):
        return [p.copy() for _, _, p in self.parameters()]

    def set_parameters(self, arrays):
        for (i, k, _), a in zip(self.parameters(), arrays):
            self.layers[i].params[k] = np.array(a, dtype=np.float64)

    def describe(self):
        return [{"type": layer.kind, **layer.config()} for layer in self.layers]


def build_model(n_channels: int = 128, n_frames: int = 87, hyper: ModelHyper | None = None,
                seed: int = 0) -> Model:
    """Four conv/pool/relu blocks, flatten, dropout+dense+relu twice, final dense and softmax.

    Weights are He-uniform from ``seed``; biases start at zero.
    """
    hyper = hyper or ModelHyper()
    if len(hyper.conv_channels) != 4 or len(hyper.dense) != 3 or hyper.dense[-1] != N_CLASSES:
        raise InvalidArgument("the classifier needs exactly 4 conv widths and 3 dense widths ending in 4")
    layers = []
    c, length = n_channels, n_frames
    for width in hyper.conv_channels:
        if length - hyper.kernel + 1 < hyper.pool:
            raise InvalidArgument(f"input length {n_frames} too short for four conv/pool blocks")
        # relu commutes with max-pooling, so pooling first is the same map on half the values.
        layers += [Conv1D(c, width, hyper.kernel), MaxPool1D(hyper.pool, hyper.pool), ReLU()]
        c, length = width, (length - hyper.kernel + 1 - hyper.pool) // hyper.pool + 1
    layers.append(Flatten())
    n_in = c * length
    for width in hyper.dense[:-1]:
        layers += [Dropout(hyper.dropout_p), Dense(n_in, width), ReLU()]
        n_in = width
    layers += [Dense(n_in, hyper.dense[-1]), Softmax()]

    rng = np.random.default_rng(seed)
    for layer in layers:
        if hasattr(layer, "init"):
            layer.init(rng)
    model = Model(layers, (n_channels, n_frames), seed, hyper)
    validate_architecture(model)
    return model


def validate_architecture(model: Model) -> None:
    """4 conv1d each directly followed by maxpool1d, 3 dense, softmax over 4 classes last."""
    kinds = [layer.kind for layer in model.layers]
    convs = [i for i, k in enumerate(kinds) if k == "conv1d"]
    if len(convs) != 4 or any(i + 1 >= len(kinds) or kinds[i + 1] != "maxpool1d" for i in convs):
        raise InvalidArgument(f"expected 4 conv1d+maxpool1d blocks, got {kinds}")
    if kinds.count("dense") != 3:
        raise InvalidArgument(f"expected 3 dense layers, got {kinds.count('dense')}")
    if kinds[-1] != "softmax" or model.output_shape != (N_CLASSES,):
        raise InvalidArgument(f"model must end in a {N_CLASSES}-way softmax")


# ---------------------------------------------------------------- optimisation

@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidArgument(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, lr, patience=2, factor=0.1, min_lr=1e-5, min_delta=PLATEAU_MIN_DELTA):
        self.lr, self.patience, self.factor, self.min_lr, self.min_delta = lr, patience, factor, min_lr, min_delta
        self.best = np.inf
        self.wait = 0
        self.reduced = False  # whether the most recent step triggered a reduction

    def step(self, loss: float) -> float:
        self.reduced = False
        if loss < self.best - self.min_delta:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
                self.reduced = True
        return self.lr


def reduce_lr_on_plateau(history, current_lr, patience=2, factor=0.1, min_lr=1e-5):
    """Learning rate to use after the last epoch in ``history``.

    Replays the validation-loss history; a reduction happens only if the last
    epoch completes a stall of ``patience`` epochs.
    """
    if len(history) == 0:
        raise InvalidArgument("history must be non-empty")
    sched = PlateauScheduler(current_lr, patience, factor, min_lr)
    for loss in history:
        sched.step(loss)
    if sched.reduced:
        return max(current_lr * factor, min_lr)
    return current_lr


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    base_lr: float = 1e-3
    min_lr: float = 1e-5
    plateau_patience: int = 2
    plateau_factor: float = 0.1
    dropout_p: float = 0.3
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.min_lr <= self.base_lr:
            raise InvalidArgument("need 0 < min_lr <= base_lr")
        if not 0 <= self.dropout_p < 1:
            raise InvalidArgument("dropout_p must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgument("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    learning_rate: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    final_parameters: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0


def as_inputs(features) -> np.ndarray:
    """Stack FeatureMatrix objects (frames x coeffs) into a (batch, coeffs, frames) array."""
    if isinstance(features, np.ndarray):
        return features
    return np.stack([np.asarray(getattr(f, "values", f), dtype=np.float64).T for f in features])


def stratified_holdout(labels, fraction, rng):
    """Boolean mask selecting ``round(fraction * n_c)`` random items of each class."""
    labels = np.asarray(labels)
    mask = np.zeros(len(labels), dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n = int(np.floor(fraction * len(idx) + 0.5))
        mask[rng.permutation(idx)[:n]] = True
    return mask


def _diagnose_nan(model, xb):
    x = xb
    for i, layer in enumerate(model.layers):
        x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            return f"{i}:{layer.kind}"
    return "loss"


def evaluate_loss(model, X, Y, batch_size=256):
    total = 0.0
    for s in range(0, len(X), batch_size):
        probs = model.forward(X[s:s + batch_size])
        total += cross_entropy(probs, Y[s:s + batch_size]) * len(probs)
    return total / len(X)


def train(model: Model, features, labels, config: TrainConfig | None = None,
          val_features=None, val_labels=None, log=None) -> TrainReport:
    """Mini-batch Adam training with plateau learning-rate reduction on validation loss.

    Without an explicit validation set, ``config.validation_fraction`` of the data
    (stratified by class) is held out. Deterministic for a fixed seed and input order.
    """
    config = config or TrainConfig()
    t0 = time.perf_counter()
    report = TrainReport()
    X = as_inputs(features)
    y = np.asarray(labels, dtype=int)
    if len(X) == 0:
        raise InvalidArgument("training set is empty")
    if config.epochs == 0:
        report.final_parameters = model.copy_parameters()
        return report

    for layer in model.layers:
        if isinstance(layer, Dropout):
            layer.p = config.dropout_p
    split_rng = np.random.default_rng([config.seed, 0])
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])

    if val_features is not None:
        Xv, yv = as_inputs(val_features), np.asarray(val_labels, dtype=int)
    elif config.validation_fraction > 0:
        hold = stratified_holdout(y, config.validation_fraction, split_rng)
        X, Xv, y, yv = X[~hold], X[hold], y[~hold], y[hold]
    else:
        Xv = yv = None
    Y = one_hot(y)
    Yv = one_hot(yv) if yv is not None and len(yv) else None

    params = [p for _, _, p in model.parameters()]
    state = AdamState.zeros_like(params)
    sched = PlateauScheduler(config.base_lr, config.plateau_patience, config.plateau_factor, config.min_lr)
    lr = config.base_lr
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(X))
        losses, correct = [], 0
        for bi, s in enumerate(range(0, len(X), config.batch_size)):
            idx = order[s:s + config.batch_size]
            loss, probs = model.loss_and_grads(X[idx], Y[idx], training=True, rng=dropout_rng)
            if not np.isfinite(loss):
                where = _diagnose_nan(model, X[idx])
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi} (layer {where})",
                                    layer=where, batch_index=bi)
            adam_step(params, model.gradients(), state, lr)
            losses.append(loss * len(idx))
            correct += int((probs.argmax(axis=1) == y[idx]).sum())
        train_loss = float(np.sum(losses) / len(X))
        val_loss = evaluate_loss(model, Xv, Yv) if Yv is not None else train_loss
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.learning_rate.append(lr)
        report.train_accuracy.append(correct / len(X))
        if log:
            log(f"epoch {epoch + 1}/{config.epochs} loss {train_loss:.4g} val {val_loss:.4g} lr {lr:.2e}")
        lr = sched.step(val_loss)
    report.final_parameters = model.copy_parameters()
    report.wall_time = time.perf_counter() - t0
    return report


def predict(model: Model, features) -> np.ndarray:
    """Class probabilities (inference mode). One FeatureMatrix gives a vector, a batch gives rows."""
    single = hasattr(features, "values") or (isinstance(features, np.ndarray) and features.ndim == 2)
    X = as_inputs([features] if single else features)
    if X.shape[1:] != model.input_shape:
        raise InvalidArgument(f"feature shape {X.shape[1:]} does not match model input {model.input_shape}")
    out = np.concatenate([model.forward(X[s:s + 256]) for s in range(0, len(X), 256)])
    return out[0] if single else out


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_FORMAT = "vehicle-audio-cnn/1"


def checkpoint_dict(model: Model, config: TrainConfig | None = None, **meta) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "input_shape": list(model.input_shape),
        "seed": model.rng_seed,
        "hyper": asdict(model.hyper) if model.hyper else None,
        "layers": [{"type": layer.kind, "config": layer.config(),
                    "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                               for k, v in sorted(layer.params.items())}}
                   for layer in model.layers],
        "train_config": asdict(config) if config else None,
        **meta,
    }


def save_checkpoint(path, model: Model, config: TrainConfig | None = None, **meta) -> None:
    """JSON checkpoint; float64 values round-trip exactly through their repr."""
    Path(path).write_text(json.dumps(checkpoint_dict(model, config, **meta), sort_keys=True), encoding="utf-8")


def model_from_dict(d: dict) -> Model:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise InvalidArgument(f"unrecognised checkpoint format {d.get('format')!r}")
    layers = []
    for spec in d["layers"]:
        layer = LAYER_TYPES[spec["type"]](**spec["config"])
        for k, p in spec["params"].items():
            layer.params[k] = np.array(p["data"], dtype=np.float64).reshape(p["shape"])
        layers.append(layer)
    hyper = d.get("hyper")
    if hyper:
        hyper = ModelHyper(**{k: tuple(v) if isinstance(v, list) else v for k, v in hyper.items()})
    return Model(layers, d["input_shape"], d.get("seed", 0), hyper)


def load_checkpoint(path) -> tuple[Model, dict]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_dict(d), d
