"""Feed-forward networks with backpropagation and Adam, in plain numpy.

Parameters of all layers live in one flat float64 buffer; each layer's weight
matrix and bias are views into it, so the optimizer updates everything with a
handful of vector operations.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericalError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
BCE_EPS = 1e-12
FORWARD_CHUNK = 1024


def activate(name: str, z: np.ndarray, out=None) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0, out=out)
    if name == "sigmoid":
        return expit(z, out=out)
    if name == "tanh":
        return np.tanh(z, out=out)
    if out is not None and out is not z:
        out[...] = z
        return out
    return z


def _activation_grad(name, z, a):
    # derivative w.r.t. the pre-activation, written in terms of the output where cheap
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class Layer:
    weights: np.ndarray  # (q_in, q_out)
    bias: np.ndarray     # (q_out,)
    activation: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


class Mlp:
    """Stack of affine layers, each followed by an element-wise activation."""

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise DataError("a model needs at least one layer")
        for i, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise DataError(f"layer {i}: unknown activation {layer.activation!r}")
            w = np.asarray(layer.weights, dtype=np.float64)
            b = np.asarray(layer.bias, dtype=np.float64)
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DataError(f"layer {i}: weights {w.shape} and bias {b.shape} do not match")
            if i and w.shape[0] != layers[i - 1].weights.shape[1]:
                raise DataError(f"layer {i} expects {w.shape[0]} inputs, previous layer "
                                f"gives {np.shape(layers[i - 1].weights)[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataError(f"layer {i}: non-finite parameters")
        sizes = [np.size(l.weights) + np.size(l.bias) for l in layers]
        self.params = np.empty(sum(sizes))
        self.layers: list[Layer] = []
        off = 0
        for layer in layers:
            w = np.asarray(layer.weights, dtype=np.float64)
            nw, nb = w.size, w.shape[1]
            wv = self.params[off:off + nw].reshape(w.shape)
            bv = self.params[off + nw:off + nw + nb]
            wv[...] = w
            bv[...] = layer.bias
            self.layers.append(Layer(wv, bv, layer.activation))
            off += nw + nb

    @classmethod
    def create(cls, dims: Sequence[int], activations: Sequence[str], seed: int = 0) -> "Mlp":
        """Glorot-uniform weights, zero biases. ``dims`` = [d, q1, ..., k]."""
        if len(activations) != len(dims) - 1:
            raise DataError("need one activation per layer")
        rng = np.random.default_rng(seed)
        layers = []
        for q_in, q_out, act in zip(dims[:-1], dims[1:], activations):
            lim = np.sqrt(6.0 / (q_in + q_out))
            layers.append(Layer(rng.uniform(-lim, lim, (q_in, q_out)), np.zeros(q_out), act))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [l.weights.shape[1] for l in self.layers]

    @property
    def activations(self) -> list[str]:
        return [l.activation for l in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def __call__(self, x):
        return forward(self, x)

    def __repr__(self):
        return f"Mlp(dims={self.dims}, activations={self.activations})"


def _as_batch(model: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DataError(f"input has shape {x.shape}, model expects {model.input_dim} features")
    return X, single


def forward(model: Mlp, x) -> np.ndarray:
    """Model output for one input vector (d,) or a batch (M, d)."""
    X, single = _as_batch(model, x)
    if not np.all(np.isfinite(X)):
        raise DataError("input contains non-finite values")
    out = np.empty((X.shape[0], model.output_dim))
    # row chunks keep the hidden activations in cache; every row is computed independently
    for lo in range(0, X.shape[0], FORWARD_CHUNK):
        a = X[lo:lo + FORWARD_CHUNK]
        for layer in model.layers:
            z = a @ layer.weights
            z += layer.bias
            a = activate(layer.activation, z, out=z)
        out[lo:lo + a.shape[0]] = a
    return out[0] if single else out


def _forward_cache(model, X):
    zs, acts = [], [X]
    a = X
    for layer in model.layers:
        z = a @ layer.weights + layer.bias
        a = activate(layer.activation, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DataError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return np.atleast_2d(pred), np.atleast_2d(target)


def loss_mse(pred, target) -> float:
    """Half mean squared norm: sum ||y - y_hat||^2 / (2M)."""
    pred, target = _check_pair(pred, target)
    return float(np.sum((target - pred) ** 2) / (2.0 * pred.shape[0]))


def loss_bce(pred, target) -> float:
    """Summed binary cross-entropy with predictions clamped to [eps, 1 - eps]."""
    pred, target = _check_pair(pred, target)
    if not np.all((target == 0) | (target == 1)):
        raise DataError("BCE targets must be 0 or 1")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))


LOSSES = {"mse": loss_mse, "bce": loss_bce}


def _loss_grad_output(loss, pred, target, out_act, z_out):
    """dE/dz for the output layer's pre-activation."""
    if loss == "mse":
        d_pred = (pred - target) / pred.shape[0]
    elif loss == "bce":
        if out_act == "sigmoid":
            return pred - target
        p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
        inside = (pred > BCE_EPS) & (pred < 1.0 - BCE_EPS)
        d_pred = np.where(inside, (p - target) / (p * (1.0 - p)), 0.0)
    else:
        raise DataError(f"unknown loss {loss!r}")
    return d_pred * _activation_grad(out_act, z_out, pred)


def _backward_flat(model: Mlp, X, Y, loss, grad_out=None):
    """(loss value, flat gradient aligned with model.params)."""
    zs, acts = _forward_cache(model, X)
    pred = acts[-1]
    value = LOSSES[loss](pred, Y)
    grad = np.empty_like(model.params) if grad_out is None else grad_out
    delta = _loss_grad_output(loss, pred, Y, model.layers[-1].activation, zs[-1])
    off = model.params.size
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        nw, nb = layer.weights.size, layer.bias.size
        off -= nw + nb
        np.matmul(acts[i].T, delta, out=grad[off:off + nw].reshape(layer.weights.shape))
        np.sum(delta, axis=0, out=grad[off + nw:off + nw + nb])
        if i:
            prev = model.layers[i - 1]
            delta = (delta @ layer.weights.T) * _activation_grad(prev.activation, zs[i - 1], acts[i])
    return value, grad


def backward(model: Mlp, X, Y, loss: str = "mse") -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-layer gradients (dE/dW, dE/db) of the batch loss."""
    X, _ = _as_batch(model, X)
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if len(X) == 0:
        raise DataError("empty batch")
    if Y.shape != (X.shape[0], model.output_dim):
        raise DataError(f"targets have shape {Y.shape}, expected {(X.shape[0], model.output_dim)}")
    _, grad = _backward_flat(model, X, Y, loss)
    out, off = [], 0
    for layer in model.layers:
        nw, nb = layer.weights.size, layer.bias.size
        out.append((grad[off:off + nw].reshape(layer.weights.shape).copy(),
                    grad[off + nw:off + nw + nb].copy()))
        off += nw + nb
    return out


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    loss: str = "bce"
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise DataError("epochs must be >= 0 and batch_size >= 1")
        if not self.learning_rate > 0:
            raise DataError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise DataError("Adam betas must lie in [0, 1)")
        if self.loss not in LOSSES:
            raise DataError(f"unknown loss {self.loss!r}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              config: TrainConfig = TrainConfig()) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise DataError("parameter, gradient and moment shapes differ")
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.t += 1
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    params -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    return params, state


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        t = np.asarray(self.targets, dtype=np.float64)
        self.targets = t[:, None] if t.ndim == 1 else t
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DataError("inputs and targets have different row counts")

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d, k = self.inputs.shape[1], self.targets.shape[1]
        w.writerow([f"x{i}" for i in range(d)] + (["y"] if k == 1 else [f"y{i}" for i in range(k)]))
        for x, y in zip(self.inputs, self.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n_targets: int = 1) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2:
            raise DataError("dataset file has no rows")
        try:
            arr = np.array([[float(v) for v in r] for r in rows[1:]])
        except ValueError as exc:
            raise DataError(f"non-numeric dataset entry: {exc}") from exc
        return cls(arr[:, :-n_targets], arr[:, -n_targets:])


@dataclass
class TrainResult:
    model: Mlp
    history: list[float] = field(default_factory=list)


def train(model: Mlp, data: Dataset, config: TrainConfig) -> TrainResult:
    """Mini-batch Adam on a copy of ``model``; history holds the full-data loss per epoch."""
    if data.inputs.shape[1] != model.input_dim or data.targets.shape[1] != model.output_dim:
        raise DataError(f"dataset is {data.inputs.shape[1]} -> {data.targets.shape[1]}, "
                        f"model is {model.input_dim} -> {model.output_dim}")
    model = model.copy()
    if config.epochs == 0:
        return TrainResult(model, [])
    rng = np.random.default_rng(config.shuffle_seed)
    state = AdamState.zeros(model.params.size)
    grad = np.empty_like(model.params)
    X, Y = data.inputs, data.targets
    n = len(data)
    history = []
    loss_fn = LOSSES[config.loss]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _backward_flat(model, X[idx], Y[idx], config.loss, grad_out=grad)
            adam_step(model.params, grad, state, config)
        value = loss_fn(forward(model, X), Y)
        if not np.isfinite(value):
            raise NumericalError(f"training diverged at epoch {epoch + 1} (loss={value})")
        history.append(value)
    return TrainResult(model, history)


def save_model(model: Mlp) -> str:
    layers = [{"activation": l.activation, "weights": l.weights.tolist(), "bias": l.bias.tolist()}
              for l in model.layers]
    return json.dumps({"layers": layers})


def load_model(text: str) -> Mlp:
    try:
        data = json.loads(text)
        layers = [Layer(np.array(item["weights"], dtype=np.float64),
                        np.array(item["bias"], dtype=np.float64), item["activation"])
                  for item in data["layers"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc
    return Mlp(layers)
