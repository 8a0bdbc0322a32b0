"""Minimal dense-network substrate.

Matrices are C-order float64 numpy arrays; a dense layer stores weights as
(out, in) so a batch forward is x @ W.T + b. Everything is deterministic:
identical inputs and parameters give bit-identical outputs, and all
randomness comes from an explicit SeedStream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activation import Barrier, EnergyMap, qt_activate
from .rng import SeedStream

QT = "qt"
RELU = "relu"
IDENTITY = "identity"


@dataclass(frozen=True)
class Activation:
    kind: str
    barrier: Barrier | None = None
    energy_map: EnergyMap | None = None

    def __post_init__(self):
        if self.kind not in (QT, RELU, IDENTITY):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == QT:
            if self.barrier is None or self.energy_map is None:
                raise ValueError("qt activation needs a barrier and an energy map")
        elif self.barrier is not None or self.energy_map is not None:
            raise ValueError(f"{self.kind} activation takes no barrier parameters")


RELU_ACTIVATION = Activation(RELU)
IDENTITY_ACTIVATION = Activation(IDENTITY)


def qt_activation(barrier: Barrier, energy_map: EnergyMap) -> Activation:
    return Activation(QT, barrier, energy_map)


def activate(pre: np.ndarray, act: Activation):
    """Elementwise activation and its local derivative d act / d pre."""
    if act.kind == QT:
        return qt_activate(pre, act.barrier, act.energy_map)
    if act.kind == RELU:
        mask = pre > 0.0
        return np.where(mask, pre, 0.0), mask.astype(np.float64)
    return np.array(pre, dtype=np.float64, copy=True), np.ones_like(pre)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: Activation

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError(f"shape mismatch: weights {self.weights.shape} "
                             f"vs bias {self.bias.shape}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class NetworkSpec:
    """Layer sizes [in, hidden..., out] plus the hidden activation and loss."""

    sizes: tuple
    hidden_activation: Activation
    loss: str = "softmax_xent"  # or "logistic"

    def __post_init__(self):
        if len(self.sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(int(s) < 1 for s in self.sizes):
            raise ValueError("layer sizes must be positive")
        if self.loss not in ("softmax_xent", "logistic"):
            raise ValueError(f"unknown loss {self.loss!r}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))


def init_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def uniform_matrix(stream: SeedStream, rows: int, cols: int, limit: float) -> np.ndarray:
    """Row-major uniform(-limit, limit) draws."""
    u = stream.uniforms(rows * cols)
    return ((2.0 * u - 1.0) * limit).reshape(rows, cols)


def init_dense_layer(stream: SeedStream, n_in: int, n_out: int,
                     activation: Activation) -> DenseLayer:
    """Weights uniform(-L, L), L = sqrt(6 / (fan_in + fan_out)); zero bias.

    Weight draws are row-major over the (out, in) matrix, so two layers built
    from equal streams are identical regardless of their activation.
    """
    w = uniform_matrix(stream, n_out, n_in, init_limit(n_in, n_out))
    return DenseLayer(w, np.zeros(n_out), activation)


def make_network(stream: SeedStream, spec: NetworkSpec) -> list[DenseLayer]:
    """Hidden layers use the spec activation; the output layer is linear."""
    layers = []
    sizes = spec.sizes
    for i in range(len(sizes) - 1):
        act = spec.hidden_activation if i < len(sizes) - 2 else IDENTITY_ACTIVATION
        layers.append(init_dense_layer(stream, sizes[i], sizes[i + 1], act))
    return layers


def dense_forward(layer: DenseLayer, x: np.ndarray):
    """Returns (pre_activations, activations, local_derivatives).

    Accepts a single input vector or a (batch, in) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.n_in:
        raise ValueError(f"input width {x.shape[-1]} != layer fan-in {layer.n_in}")
    pre = x @ layer.weights.T + layer.bias
    act, der = activate(pre, layer.activation)
    return pre, act, der


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)   # input to each layer
    derivs: list = field(default_factory=list)   # local derivative per layer
    output: np.ndarray | None = None


def net_forward(layers: list[DenseLayer], x: np.ndarray) -> ForwardCache:
    cache = ForwardCache()
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for layer in layers:
        cache.inputs.append(h)
        _, h, der = dense_forward(layer, h)
        cache.derivs.append(der)
    cache.output = h
    return cache


def softmax_cross_entropy(logits, label: int):
    """Single-sample loss and gradient w.r.t. the logits.

    Numerically stable log-sum-exp; grad = softmax - one_hot(label).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("logits must be a vector")
    label = int(label)
    if not 0 <= label < z.shape[0]:
        raise ValueError(f"label {label} out of range for {z.shape[0]} classes")
    m = z.max()
    exp = np.exp(z - m)
    total = exp.sum()
    loss = math.log(total) + m - z[label]
    grad = exp / total
    grad[label] -= 1.0
    return loss, grad


def batch_softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss over the batch; grad already divided by the batch size."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    exp = np.exp(z - m)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    rows = np.arange(n)
    losses = np.log(total[:, 0]) + m[:, 0] - z[rows, labels]
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return float(losses.mean()), grad / n


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    exp = np.exp(z - m)
    return exp / exp.sum(axis=-1, keepdims=True)


def backward(layers: list[DenseLayer], cache: ForwardCache, grad_output: np.ndarray):
    """Reverse-mode gradients for every weight and bias.

    grad_output is dLoss/d(output activations), shape (batch, out).
    Returns [(dW, db), ...] matching the layer order.
    """
    grad = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
    if grad.shape != cache.output.shape:
        raise ValueError(f"grad shape {grad.shape} != output shape {cache.output.shape}")
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        delta = grad * cache.derivs[i]
        grads[i] = (delta.T @ cache.inputs[i], delta.sum(axis=0))
        if i:
            grad = delta @ layers[i].weights
    return grads


def sgd_update(params: list[np.ndarray], grads: list[np.ndarray], lr: float):
    """In-place p <- p - lr * g over matching parameter/gradient lists."""
    if len(params) != len(grads):
        raise ValueError("params and grads must align")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        p -= lr * g
    return params


def net_loss(layers: list[DenseLayer], x: np.ndarray, labels: np.ndarray):
    cache = net_forward(layers, x)
    loss, grad = batch_softmax_cross_entropy(cache.output, labels)
    return loss, cache, grad


@dataclass
class GradientCheckReport:
    max_rel_error: float
    location: tuple  # (layer index, "weights"|"bias", flat index)
    n_checked: int
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _has_relu(layers) -> bool:
    return any(layer.activation.kind == RELU for layer in layers)


def _pre_activations_near_kink(layers, x, tol=1e-6) -> bool:
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for layer in layers:
        pre, h, _ = dense_forward(layer, h)
        if layer.activation.kind == RELU and np.any(np.abs(pre) < tol):
            return True
    return False


def gradient_check(layers: list[DenseLayer], x: np.ndarray, labels: np.ndarray,
                   tolerance: float = 1e-4, h: float = 1e-5,
                   max_params: int = 1000,
                   stream: SeedStream | None = None) -> GradientCheckReport:
    """Central-difference check of backward() on a batch.

    Above max_params parameters a seeded random subset is checked (stream
    required). For ReLU nets with a stream, inputs are re-drawn until no
    pre-activation sits within 1e-6 of the kink. Relative error uses
    |a - b| / max(1, |a|, |b|).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if stream is not None and _has_relu(layers):
        tries = 0
        while _pre_activations_near_kink(layers, x) and tries < 100:
            x = stream.gaussians(x.size).reshape(x.shape)
            tries += 1

    _, cache, grad_out = net_loss(layers, x, labels)
    analytic = backward(layers, cache, grad_out)

    slots = []
    for li, layer in enumerate(layers):
        slots.extend((li, "weights", j) for j in range(layer.weights.size))
        slots.extend((li, "bias", j) for j in range(layer.bias.size))
    if len(slots) > max_params:
        if stream is None:
            raise ValueError("need a stream to subsample a large parameter set")
        pick = stream.permutation(len(slots))[:max_params]
        slots = [slots[i] for i in pick]

    worst = 0.0
    worst_loc = slots[0]
    for li, kind, j in slots:
        arr = layers[li].weights if kind == "weights" else layers[li].bias
        flat = arr.reshape(-1)
        keep = flat[j]
        flat[j] = keep + h
        lp, _, _ = net_loss(layers, x, labels)
        flat[j] = keep - h
        lm, _, _ = net_loss(layers, x, labels)
        flat[j] = keep
        fd = (lp - lm) / (2.0 * h)
        an = analytic[li][0].reshape(-1)[j] if kind == "weights" else analytic[li][1][j]
        rel = abs(an - fd) / max(1.0, abs(an), abs(fd))
        if rel > worst:
            worst = rel
            worst_loc = (li, kind, j)
    return GradientCheckReport(worst, worst_loc, len(slots), tolerance)
