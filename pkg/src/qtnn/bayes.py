"""Variational Bayesian dense network.

Every weight and bias carries a mean-field Gaussian posterior N(mu, sigma^2)
with sigma = ln(1 + e^rho) against a standard-normal prior. Training draws
one reparameterised weight sample per batch (w = mu + sigma * eps, the same
sample for every batch element) and minimises mean NLL plus the KL penalty
scaled by beta / batches-per-epoch. Prediction averages softmax outputs over
independent weight samples, accumulated in sample-index order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Activation, DenseLayer, IDENTITY_ACTIVATION
from .rng import SeedStream


def softplus(x):
    """ln(1 + e^x), overflow-safe on both tails."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    """1 / (1 + e^-x), overflow-safe on both tails."""
    x = np.asarray(x, dtype=np.float64)
    ex = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + ex), ex / (1.0 + ex))


def _sigma_and_gate(rho):
    """softplus(rho) and sigmoid(rho) from one shared exp pass."""
    t = np.exp(-np.abs(rho))
    sig = np.maximum(rho, 0.0) + np.log1p(t)
    gate = np.where(rho >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
    return sig, gate


RHO_INIT = -3.0  # sigma ~ 0.0486: early training resembles the mean network


@dataclass
class BayesLayer:
    mus: np.ndarray        # (out, in)
    rhos: np.ndarray       # (out, in)
    bias_mus: np.ndarray   # (out,)
    bias_rhos: np.ndarray  # (out,)
    activation: Activation

    def __post_init__(self):
        if self.mus.shape != self.rhos.shape:
            raise ValueError("mu/rho weight shapes differ")
        if self.bias_mus.shape != self.bias_rhos.shape:
            raise ValueError("mu/rho bias shapes differ")
        if self.mus.shape[0] != self.bias_mus.shape[0]:
            raise ValueError("weight/bias fan-out mismatch")

    @property
    def n_in(self):
        return self.mus.shape[1]

    @property
    def n_out(self):
        return self.mus.shape[0]

    def parameter_arrays(self):
        """Declaration order used by sampling and checkpoints."""
        return [self.mus, self.rhos, self.bias_mus, self.bias_rhos]


def init_bayes_layer(stream: SeedStream, n_in: int, n_out: int,
                     activation: Activation) -> BayesLayer:
    """mu by the dense init scheme (same draws as a plain layer), rho = -3."""
    mus = nn.uniform_matrix(stream, n_out, n_in, nn.init_limit(n_in, n_out))
    return BayesLayer(mus, np.full((n_out, n_in), RHO_INIT),
                      np.zeros(n_out), np.full(n_out, RHO_INIT), activation)


def make_bayes_network(stream: SeedStream, sizes, hidden_activation: Activation):
    layers = []
    for i in range(len(sizes) - 1):
        act = hidden_activation if i < len(sizes) - 2 else IDENTITY_ACTIVATION
        layers.append(init_bayes_layer(stream, sizes[i], sizes[i + 1], act))
    return layers


def sample_weights(layer: BayesLayer, eps_stream) -> DenseLayer:
    """Concrete layer w = mu + ln(1 + e^rho) * eps.

    eps is consumed in row-major parameter order: the weight matrix first,
    then the bias. Pass any object with .gaussians(n) (test hooks included).
    """
    eps_w = np.asarray(eps_stream.gaussians(layer.mus.size)).reshape(layer.mus.shape)
    eps_b = np.asarray(eps_stream.gaussians(layer.bias_mus.size))
    w = layer.mus + softplus(layer.rhos) * eps_w
    b = layer.bias_mus + softplus(layer.bias_rhos) * eps_b
    return DenseLayer(w, b, layer.activation), eps_w, eps_b


def sample_network(layers, eps_stream):
    sampled = []
    eps = []
    for layer in layers:
        dense, eps_w, eps_b = sample_weights(layer, eps_stream)
        sampled.append(dense)
        eps.append((eps_w, eps_b))
    return sampled, eps


def kl_gaussian(mu, rho):
    """KL(N(mu, sigma^2) || N(0, 1)) elementwise, sigma = ln(1 + e^rho)."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = softplus(np.asarray(rho, dtype=np.float64))
    return 0.5 * (mu * mu + sigma * sigma - 1.0 - 2.0 * np.log(sigma))


def kl_total(layers) -> float:
    total = 0.0
    for layer in layers:
        total += kl_gaussian(layer.mus, layer.rhos).sum()
        total += kl_gaussian(layer.bias_mus, layer.bias_rhos).sum()
    return float(total)


def elbo_loss(layers, x, labels, eps_stream, beta: float, n_batches: int,
              compute_loss: bool = True):
    """One reparameterised sample; returns (loss, grads per layer).

    loss = mean NLL + beta * KL_total / n_batches. Gradients flow through the
    sample (dw/dmu = 1, dw/drho = eps * sigmoid(rho)) and through the KL term.
    Grads are [(d_mus, d_rhos, d_bias_mus, d_bias_rhos), ...].

    compute_loss=False skips the KL value (gradients are unaffected) and the
    returned loss is the NLL term alone; the inner training loop uses this
    because it never records per-batch losses.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    # sigma and its rho-sensitivity feed sampling, the KL value and every
    # gradient below, so compute them once per layer from one exp pass
    gates = [(_sigma_and_gate(l.rhos), _sigma_and_gate(l.bias_rhos)) for l in layers]
    sampled, eps = [], []
    for layer, ((sig_w, _), (sig_b, _)) in zip(layers, gates):
        eps_w = np.asarray(eps_stream.gaussians(layer.mus.size)).reshape(layer.mus.shape)
        eps_b = np.asarray(eps_stream.gaussians(layer.bias_mus.size))
        sampled.append(nn.DenseLayer(layer.mus + sig_w * eps_w,
                                     layer.bias_mus + sig_b * eps_b,
                                     layer.activation))
        eps.append((eps_w, eps_b))
    cache = nn.net_forward(sampled, x)
    nll, grad_out = nn.batch_softmax_cross_entropy(cache.output, labels)
    dense_grads = nn.backward(sampled, cache, grad_out)

    kl_scale = beta / float(n_batches)
    loss = nll
    grads = []
    for layer, (dw, db), (eps_w, eps_b), ((sig_w, gate_w), (sig_b, gate_b)) in zip(
            layers, dense_grads, eps, gates):
        if kl_scale != 0.0 and compute_loss:
            loss += kl_scale * float(
                0.5 * (np.sum(layer.mus * layer.mus) + np.sum(sig_w * sig_w)
                       - sig_w.size - 2.0 * np.sum(np.log(sig_w)))
                + 0.5 * (np.sum(layer.bias_mus * layer.bias_mus)
                         + np.sum(sig_b * sig_b) - sig_b.size
                         - 2.0 * np.sum(np.log(sig_b))))
        d_mus = dw + kl_scale * layer.mus
        d_rhos = (dw * eps_w + kl_scale * (sig_w - 1.0 / sig_w)) * gate_w
        d_bmus = db + kl_scale * layer.bias_mus
        d_brhos = (db * eps_b + kl_scale * (sig_b - 1.0 / sig_b)) * gate_b
        grads.append((d_mus, d_rhos, d_bmus, d_brhos))
    return loss, grads


def predict_mc(layers, x, n_samples: int, stream: SeedStream) -> np.ndarray:
    """Mean softmax over n_samples weight draws; rows sum to 1 within 1e-12.

    Sample j uses the pre-assigned child stream stream.spawn(j) and results
    are accumulated in sample-index order, so any parallel fan-out that
    reduces in that order is bit-identical to this serial loop.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    sigmas = [(softplus(l.rhos), softplus(l.bias_rhos)) for l in layers]
    acc = np.zeros((x.shape[0], layers[-1].n_out))
    for j in range(n_samples):
        child = stream.spawn(j)
        sampled = []
        for layer, (sig_w, sig_b) in zip(layers, sigmas):
            eps_w = np.asarray(child.gaussians(layer.mus.size)).reshape(layer.mus.shape)
            eps_b = np.asarray(child.gaussians(layer.bias_mus.size))
            sampled.append(nn.DenseLayer(layer.mus + sig_w * eps_w,
                                         layer.bias_mus + sig_b * eps_b,
                                         layer.activation))
        cache = nn.net_forward(sampled, x)
        acc += nn.softmax(cache.output)
    return acc / n_samples


def nll_and_accuracy(probs: np.ndarray, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.int64)
    p_true = probs[np.arange(probs.shape[0]), labels]
    loss = float(-np.log(np.maximum(p_true, 1e-300)).mean())
    acc = float((probs.argmax(axis=1) == labels).mean())
    return loss, acc


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_loss: float
    test_accuracy: float
    wall_ms: int


@dataclass
class BnnTrainSettings:
    epochs: int
    lr: float
    batch: int
    mc_samples: int
    beta: float


def train_bnn(layers, train_x, train_y, test_x, test_y,
              settings: BnnTrainSettings, stream: SeedStream,
              epoch_callback=None):
    """Shuffled mini-batch ELBO SGD; per-epoch metrics via predict_mc.

    Child streams (fixed): spawn(0) batch shuffling, spawn(1) weight samples,
    spawn(2) evaluation; epoch e evaluates the concatenated [train; test]
    matrix in one predict_mc call on spawn(2).spawn(e).spawn(0).
    Deterministic under seed.
    """
    if settings.epochs < 0:
        raise ValueError("epochs must be >= 0")
    if settings.lr <= 0 or settings.batch < 1 or settings.mc_samples < 1:
        raise ValueError("lr must be > 0 and batch/mc_samples >= 1")
    if settings.beta < 0:
        raise ValueError("beta must be >= 0")
    train_x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    n = train_x.shape[0]
    if n == 0:
        raise ValueError("training set must be non-empty")
    train_y = np.asarray(train_y, dtype=np.int64)

    shuffle_stream = stream.spawn(0)
    sample_stream = stream.spawn(1)
    eval_stream = stream.spawn(2)
    n_batches = (n + settings.batch - 1) // settings.batch

    test_x = np.atleast_2d(np.asarray(test_x, dtype=np.float64))
    test_y = np.asarray(test_y, dtype=np.int64)
    eval_x = np.concatenate([train_x, test_x], axis=0)

    params = []
    for layer in layers:
        params.extend(layer.parameter_arrays())

    history = []
    for epoch in range(1, settings.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_stream.permutation(n)
        for b in range(n_batches):
            idx = order[b * settings.batch:(b + 1) * settings.batch]
            _, grads = elbo_loss(layers, train_x[idx], train_y[idx],
                                 sample_stream, settings.beta, n_batches,
                                 compute_loss=False)
            flat = [g for layer_grads in grads for g in layer_grads]
            nn.sgd_update(params, flat, settings.lr)
        ev = eval_stream.spawn(epoch)
        probs = predict_mc(layers, eval_x, settings.mc_samples, ev.spawn(0))
        tr_loss, tr_acc = nll_and_accuracy(probs[:n], train_y)
        te_loss, te_acc = nll_and_accuracy(probs[n:], test_y)
        wall = int(round((time.perf_counter() - t0) * 1000.0))
        m = EpochMetrics(epoch, tr_loss, tr_acc, te_loss, te_acc, wall)
        history.append(m)
        if epoch_callback is not None and epoch_callback(m) is False:
            break
    return layers, history


def checkpoint_arrays(layers):
    arrays = []
    for layer in layers:
        arrays.extend(layer.parameter_arrays())
    return arrays


def layer_sizes(layers):
    return [layers[0].n_in] + [layer.n_out for layer in layers]


def from_checkpoint_arrays(sizes, arrays, hidden_activation: Activation):
    layers = []
    for i in range(len(sizes) - 1):
        act = hidden_activation if i < len(sizes) - 2 else IDENTITY_ACTIVATION
        mus, rhos, bmus, brhos = arrays[4 * i:4 * i + 4]
        layers.append(BayesLayer(np.array(mus), np.array(rhos),
                                 np.array(bmus), np.array(brhos), act))
    return layers
