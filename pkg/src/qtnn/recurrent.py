"""Elman recurrent classifier for binary phrase sentiment.

Hidden update h_t = act(W_xh e(x_t) + W_hh h_{t-1} + b_h) with h_0 = 0; a
logistic head on the final hidden state gives p(positive). Training is
backpropagation through time over single sequences with global-norm gradient
clipping. With the tunnelling activation every hidden entry is a transmission
probability, so hidden states live in [0, 1].
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .activation import Barrier, EnergyMap
from .nn import QT, RELU, Activation, init_limit, uniform_matrix
from .rng import SeedStream

D_EMB_DEFAULT = 16
HIDDEN_DEFAULT = 32
CLIP_NORM = 5.0


@dataclass
class RecurrentCell:
    embedding: np.ndarray  # (vocab, d_emb)
    w_xh: np.ndarray       # (hidden, d_emb)
    w_hh: np.ndarray       # (hidden, hidden)
    b_h: np.ndarray        # (hidden,)
    head_w: np.ndarray     # (hidden,)
    head_b: float
    activation: Activation

    def __post_init__(self):
        vocab, d_emb = self.embedding.shape
        h = self.b_h.shape[0]
        if h < 1:
            raise ValueError("hidden size must be >= 1")
        if self.w_xh.shape != (h, d_emb) or self.w_hh.shape != (h, h) \
                or self.head_w.shape != (h,):
            raise ValueError("inconsistent cell shapes")
        if self.activation.kind not in (QT, RELU):
            raise ValueError("cell activation must be qt or relu")

    @property
    def vocab_size(self):
        return self.embedding.shape[0]

    @property
    def hidden_size(self):
        return self.b_h.shape[0]

    def parameter_arrays(self):
        """Declaration order used by gradients and checkpoints."""
        return [self.embedding, self.w_xh, self.w_hh, self.b_h,
                self.head_w, np.array([self.head_b])]

    def sizes(self):
        return [self.vocab_size, self.embedding.shape[1], self.hidden_size]


def init_cell(stream: SeedStream, vocab: int, activation: Activation,
              d_emb: int = D_EMB_DEFAULT, hidden: int = HIDDEN_DEFAULT) -> RecurrentCell:
    """Matrices by the dense uniform scheme (draw order: embedding, W_xh,
    W_hh, head); biases start at zero."""
    emb = uniform_matrix(stream, vocab, d_emb, init_limit(vocab, d_emb))
    w_xh = uniform_matrix(stream, hidden, d_emb, init_limit(d_emb, hidden))
    w_hh = uniform_matrix(stream, hidden, hidden, init_limit(hidden, hidden))
    head = uniform_matrix(stream, 1, hidden, init_limit(hidden, 1))[0]
    return RecurrentCell(emb, w_xh, w_hh, np.zeros(hidden), head, 0.0, activation)


def _act_params(cell: RecurrentCell):
    if cell.activation.kind == QT:
        b = cell.activation.barrier
        m = cell.activation.energy_map
        kind = _kernels.EMAP_SMOOTH if m.kind == "smooth" else _kernels.EMAP_CLAMP
        return _kernels.ACT_QT, b.height, b.width, kind, m.scale
    return _kernels.ACT_RELU, 1.0, 1.0, _kernels.EMAP_SMOOTH, 1.0


def _check_sequence(cell: RecurrentCell, token_ids) -> np.ndarray:
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.shape[0] == 0:
        raise ValueError("token sequence must be non-empty")
    if ids.min() < 0 or ids.max() >= cell.vocab_size:
        raise ValueError(f"token id out of vocabulary (size {cell.vocab_size})")
    return ids


def logistic(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def bce_from_prob(p: float, label: int) -> float:
    """Binary cross-entropy -[y ln p + (1-y) ln(1-p)]; 0 when p equals y."""
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    if label == 1:
        return 0.0 if p == 1.0 else -math.log(p)
    return 0.0 if p == 0.0 else -math.log1p(-p)


def head_grad_from_prob(p: float, label: int) -> float:
    """dLoss/dz at the head logit; 0 exactly when p equals the label."""
    return p - float(label)


def rnn_forward(cell: RecurrentCell, token_ids):
    """Hidden states (T, hidden) and the positive-class probability."""
    ids = _check_sequence(cell, token_ids)
    t_len = ids.shape[0]
    h = cell.hidden_size
    hs = np.empty((t_len, h))
    pre = np.empty((t_len, h))
    der = np.empty((t_len, h))
    act_kind, v0, a, ek, es = _act_params(cell)
    z = _kernels.rnn_forward_kernel(ids, cell.embedding, cell.w_xh, cell.w_hh,
                                    cell.b_h, cell.head_w, float(cell.head_b),
                                    act_kind, v0, a, ek, es, hs, pre, der)
    return hs, logistic(float(z))


def clip_gradients(grads, max_norm: float = CLIP_NORM) -> float:
    """Scales every array in place if the global norm exceeds max_norm."""
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


def bptt(cell: RecurrentCell, token_ids, label: int, clip_norm: float = CLIP_NORM):
    """Loss plus clipped gradients in parameter declaration order.

    Returns (bce loss, [d_embedding, d_w_xh, d_w_hh, d_b_h, d_head_w,
    d_head_b (1,)]).
    """
    ids = _check_sequence(cell, token_ids)
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    t_len = ids.shape[0]
    h = cell.hidden_size
    grads = [np.zeros_like(cell.embedding), np.zeros_like(cell.w_xh),
             np.zeros_like(cell.w_hh), np.zeros_like(cell.b_h),
             np.zeros_like(cell.head_w), np.zeros(1)]
    hs = np.empty((t_len, h))
    pre = np.empty((t_len, h))
    der = np.empty((t_len, h))
    dh = np.empty(h)
    act_kind, v0, a, ek, es = _act_params(cell)
    loss = _kernels.rnn_bptt_kernel(ids, cell.embedding, cell.w_xh, cell.w_hh,
                                    cell.b_h, cell.head_w, float(cell.head_b),
                                    act_kind, v0, a, ek, es, float(label),
                                    grads[0], grads[1], grads[2], grads[3],
                                    grads[4], grads[5], hs, pre, der, dh)
    clip_gradients(grads, clip_norm)
    return float(loss), grads


def _safe_bce(p: float, label: int) -> float:
    # metric-path BCE with a floor so a saturated wrong prediction stays finite
    if label == 1:
        return -math.log(max(p, 1e-300))
    return -math.log(max(1.0 - p, 1e-300))


def evaluate(cell: RecurrentCell, sequences, labels):
    """Mean BCE and accuracy (threshold 0.5) over a list of sequences."""
    total = 0.0
    correct = 0
    for ids, y in zip(sequences, labels):
        _, p = rnn_forward(cell, ids)
        total += _safe_bce(p, int(y))
        correct += int((p >= 0.5) == bool(y))
    n = len(labels)
    return total / n, correct / n


@dataclass
class RnnTrainSettings:
    epochs: int
    lr: float


def train_rnn(cell: RecurrentCell, train_seqs, train_labels, test_seqs,
              test_labels, settings: RnnTrainSettings, stream: SeedStream,
              epoch_callback=None):
    """Per-epoch shuffled SGD over single sequences (batch size 1).

    Child streams: spawn(0) shuffles sequence order. Metrics per epoch on the
    train and held-out splits; deterministic under seed.
    """
    if settings.epochs < 0:
        raise ValueError("epochs must be >= 0")
    if settings.lr <= 0:
        raise ValueError("lr must be > 0")
    if len(train_seqs) == 0:
        raise ValueError("training set must be non-empty")
    shuffle_stream = stream.spawn(0)
    params = cell.parameter_arrays()

    from .bayes import EpochMetrics  # same record shape as the dense trainer

    history = []
    for epoch in range(1, settings.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_stream.permutation(len(train_seqs))
        for i in order:
            _, grads = bptt(cell, train_seqs[i], int(train_labels[i]))
            for p, g in zip(params[:-1], grads[:-1]):
                p -= settings.lr * g
            cell.head_b = float(cell.head_b - settings.lr * grads[-1][0])
        tr_loss, tr_acc = evaluate(cell, train_seqs, train_labels)
        te_loss, te_acc = evaluate(cell, test_seqs, test_labels)
        wall = int(round((time.perf_counter() - t0) * 1000.0))
        m = EpochMetrics(epoch, tr_loss, tr_acc, te_loss, te_acc, wall)
        history.append(m)
        if epoch_callback is not None and epoch_callback(m) is False:
            break
    return cell, history


def checkpoint_arrays(cell: RecurrentCell):
    return cell.parameter_arrays()


def from_checkpoint_arrays(arrays, activation: Activation) -> RecurrentCell:
    emb, w_xh, w_hh, b_h, head_w, head_b = arrays
    return RecurrentCell(np.array(emb), np.array(w_xh), np.array(w_hh),
                         np.array(b_h), np.array(head_w), float(head_b[0]),
                         activation)
