"""Experiment harness: deterministic runs, CSV metrics, checkpoints, exports.

Stream layout per run (root = SeedStream(seed, 0)): spawn(0) model init,
spawn(1) training (its children are documented on the trainers), spawn(4)
dataset synthesis/corpus shuffle, spawn(5) the train/test split, spawn(6)
offline evaluation (eval and dump-misclassified commands). The activation
choice consumes no draws, so qt-* and relu-* runs with one seed share initial
weights, batch order and data exactly.

metrics.csv schema: epoch,split,loss,accuracy,model,seed,wall_ms with two
rows per epoch (train then test). Everything except wall_ms is a pure
function of the config text.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from . import bayes, checkpoint, data, nn, plots, recurrent
from .activation import transmission, transmission_grad
from .config import ConfigError, ExperimentConfig
from .data import DataFormatError
from .rng import SeedStream
from .well import bound_state_energies

METRICS_HEADER = "epoch,split,loss,accuracy,model,seed,wall_ms"
CHECKPOINT_NAME = "checkpoint.qtnn"
PPM_HEADER = b"P6\n32 32\n255\n"


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    split: str  # train | test
    loss: float
    accuracy: float
    model: str
    seed: int
    wall_ms: int

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.split},{self.loss!r},{self.accuracy!r},"
                f"{self.model},{self.seed},{self.wall_ms}")


def _records_from_history(history, model: str, seed: int):
    records = []
    for m in history:
        records.append(MetricsRecord(m.epoch, "train", m.train_loss,
                                     m.train_accuracy, model, seed, m.wall_ms))
        records.append(MetricsRecord(m.epoch, "test", m.test_loss,
                                     m.test_accuracy, model, seed, m.wall_ms))
    return records


def write_metrics_csv(path, records):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


# ---------------------------------------------------------------------------
# Dataset and model assembly from a config
# ---------------------------------------------------------------------------

def _hidden_activation(cfg: ExperimentConfig) -> nn.Activation:
    if cfg.activation_name == "qt":
        return nn.qt_activation(cfg.barrier(), cfg.energy_map_obj())
    return nn.RELU_ACTIVATION


def load_image_dataset(cfg: ExperimentConfig, root: SeedStream):
    """(train_x, train_y, test_x, test_y) for the bnn family."""
    if cfg.data_path is not None:
        with open(cfg.data_path, "rb") as fh:
            ds = data.load_cifar_binary(fh.read())
        data.require_binary_labels(ds)
    else:
        ds = data.synth_vehicle_images(cfg.synthetic_count, root.spawn(4))
    if len(ds) < 2:
        raise DataFormatError("image dataset needs at least 2 records")
    tr_idx, te_idx = data.split_indices(ds.labels, cfg.split_fraction, root.spawn(5))
    train, test = ds.take(tr_idx), ds.take(te_idx)
    return (data.images_to_features(train), train.labels.astype(np.int64),
            data.images_to_features(test), test.labels.astype(np.int64),
            test)


def load_phrase_dataset(cfg: ExperimentConfig, root: SeedStream):
    """(train sequences, labels, test sequences, labels, vocab) for rnn."""
    if cfg.data_path is not None:
        corpus = data.load_phrase_corpus(cfg.data_path)
    else:
        corpus = data.gen_phrases(data.Lexicon(), root.spawn(4))
    labels = np.array(corpus.labels)
    tr_idx, te_idx = data.split_indices(labels, cfg.split_fraction, root.spawn(5))
    train, test = corpus.take(tr_idx), corpus.take(te_idx)
    vocab = data.build_vocab(train)
    tr_seqs = [vocab.encode(p) for p in train.phrases]
    te_seqs = [vocab.encode(p) for p in test.phrases]
    return tr_seqs, list(train.labels), te_seqs, list(test.labels), vocab


def _checkpoint_barrier(cfg: ExperimentConfig):
    if cfg.activation_name == "qt":
        return cfg.barrier_height, cfg.barrier_width
    return 0.0, 0.0  # relu models carry no barrier


def _save_bnn_checkpoint(path, cfg, layers):
    v0, a = _checkpoint_barrier(cfg)
    checkpoint.save(path, "bnn", bayes.layer_sizes(layers), cfg.activation_name,
                    v0, a, bayes.checkpoint_arrays(layers))


def _save_rnn_checkpoint(path, cfg, cell):
    v0, a = _checkpoint_barrier(cfg)
    checkpoint.save(path, "rnn", cell.sizes(), cfg.activation_name, v0, a,
                    recurrent.checkpoint_arrays(cell))


# ---------------------------------------------------------------------------
# run_experiment / evaluate
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir, epoch_callback=None):
    """Train per config; write metrics.csv, figures and a final checkpoint.

    Returns the list of MetricsRecord written. Byte-identical metrics.csv
    (modulo the wall_ms column) and checkpoint for equal configs.
    """
    os.makedirs(out_dir, exist_ok=True)
    root = SeedStream(cfg.seed, 0)
    records = []
    if cfg.family == "bnn":
        train_x, train_y, test_x, test_y, _ = load_image_dataset(cfg, root)
        layers = bayes.make_bayes_network(
            root.spawn(0), (train_x.shape[1], cfg.hidden, 2), _hidden_activation(cfg))
        settings = bayes.BnnTrainSettings(cfg.epochs, cfg.lr, cfg.batch,
                                          cfg.mc_samples, cfg.beta)
        layers, history = bayes.train_bnn(layers, train_x, train_y, test_x,
                                          test_y, settings, root.spawn(1),
                                          epoch_callback)
        _save_bnn_checkpoint(os.path.join(out_dir, CHECKPOINT_NAME), cfg, layers)
    else:
        tr_seqs, tr_y, te_seqs, te_y, vocab = load_phrase_dataset(cfg, root)
        cell = recurrent.init_cell(root.spawn(0), len(vocab),
                                   _hidden_activation(cfg), hidden=cfg.hidden)
        settings = recurrent.RnnTrainSettings(cfg.epochs, cfg.lr)
        cell, history = recurrent.train_rnn(cell, tr_seqs, tr_y, te_seqs, te_y,
                                            settings, root.spawn(1),
                                            epoch_callback)
        _save_rnn_checkpoint(os.path.join(out_dir, CHECKPOINT_NAME), cfg, cell)

    records = _records_from_history(history, cfg.model, cfg.seed)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), records)
    if history:
        plots.save_metrics_figure(history, os.path.join(out_dir, "metrics.png"),
                                  f"{cfg.model} seed {cfg.seed}")
    return records


def _load_model(cfg: ExperimentConfig, checkpoint_path):
    meta, arrays = checkpoint.load(checkpoint_path)
    if meta["kind"] != cfg.family:
        raise ConfigError(
            f"checkpoint kind {meta['kind']!r} does not match model {cfg.model!r}")
    if meta["activation"] != cfg.activation_name:
        raise ConfigError(
            f"checkpoint activation {meta['activation']!r} does not match "
            f"model {cfg.model!r}")
    act = _hidden_activation(cfg)
    if meta["kind"] == "bnn":
        return bayes.from_checkpoint_arrays(meta["layers"], arrays, act)
    return recurrent.from_checkpoint_arrays(arrays, act)


def evaluate(cfg: ExperimentConfig, checkpoint_path):
    """Loss/accuracy of a checkpoint on the config's train and test splits.

    Returns [(split, loss, accuracy), ...]. Bayesian models predict with
    predict_mc at cfg.mc_samples on the offline-evaluation stream.
    """
    root = SeedStream(cfg.seed, 0)
    model = _load_model(cfg, checkpoint_path)
    if cfg.family == "bnn":
        train_x, train_y, test_x, test_y, _ = load_image_dataset(cfg, root)
        ev = root.spawn(6)
        out = []
        for split, x, y, tag in (("train", train_x, train_y, 0),
                                 ("test", test_x, test_y, 1)):
            probs = bayes.predict_mc(model, x, cfg.mc_samples, ev.spawn(tag))
            loss, acc = bayes.nll_and_accuracy(probs, y)
            out.append((split, loss, acc))
        return out
    tr_seqs, tr_y, te_seqs, te_y, _ = load_phrase_dataset(cfg, root)
    out = []
    for split, seqs, y in (("train", tr_seqs, tr_y), ("test", te_seqs, te_y)):
        loss, acc = recurrent.evaluate(model, seqs, y)
        out.append((split, loss, acc))
    return out


# ---------------------------------------------------------------------------
# Activation table and bound states
# ---------------------------------------------------------------------------

def activation_table(barrier, e_min: float, e_max: float, steps: int):
    """Evenly spaced rows (E, T, dT/dE) over [e_min, e_max]."""
    steps = int(steps)
    if steps < 2:
        raise ConfigError(f"steps must be >= 2, got {steps}")
    if not 0.0 < e_min < e_max:
        raise ConfigError(f"need 0 < E_min < E_max, got [{e_min}, {e_max}]")
    rows = []
    width = e_max - e_min
    for i in range(steps):
        e = e_min + width * i / (steps - 1)
        rows.append((e, transmission(e, barrier), transmission_grad(e, barrier)))
    return rows


def write_activation_table(path, rows):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("E,T,dTdE\n")
        for e, t, g in rows:
            fh.write(f"{e!r},{t!r},{g!r}\n")


def bound_states_table(barrier) -> str:
    """One line per level: index, E_n, E_n + V0 (ascending)."""
    lines = []
    for i, e in enumerate(bound_state_energies(barrier), start=1):
        lines.append(f"{i} {e!r} {e + barrier.height!r}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Misclassification export
# ---------------------------------------------------------------------------

def write_ppm(path, record: np.ndarray):
    """P6 PPM: header then 3072 interleaved RGB bytes (planar input)."""
    with open(path, "wb") as fh:
        fh.write(PPM_HEADER)
        fh.write(data.planar_to_interleaved(record).tobytes())


def dump_misclassified(cfg: ExperimentConfig, checkpoint_path, out_dir) -> int:
    """Export every misclassified test image as mis_<i>_<true>_<pred>.ppm
    plus an index.csv row `file,true,pred,p_military`; returns the count.

    <i> is the image's index within the test split. Predictions use
    predict_mc at cfg.mc_samples on the offline-evaluation stream, so the
    dump is deterministic for a given config and checkpoint.
    """
    if cfg.family != "bnn":
        raise ConfigError("misclassification dump needs an image (bnn) model")
    os.makedirs(out_dir, exist_ok=True)
    root = SeedStream(cfg.seed, 0)
    model = _load_model(cfg, checkpoint_path)
    _, _, test_x, test_y, test_set = load_image_dataset(cfg, root)
    probs = bayes.predict_mc(model, test_x, cfg.mc_samples, root.spawn(6).spawn(1))
    preds = probs.argmax(axis=1)
    count = 0
    index_rows = []
    for i in range(test_x.shape[0]):
        true, pred = int(test_y[i]), int(preds[i])
        if true == pred:
            continue
        name = f"mis_{i}_{true}_{pred}.ppm"
        write_ppm(os.path.join(out_dir, name), test_set.images[i])
        index_rows.append(f"{name},{true},{pred},{probs[i, 1]!r}")
        count += 1
    with open(os.path.join(out_dir, "index.csv"), "w", encoding="ascii",
              newline="\n") as fh:
        fh.write("file,true,pred,p_military\n")
        for row in index_rows:
            fh.write(row + "\n")
    return count


def wall_time_ms(start: float) -> int:
    return int(round((time.perf_counter() - start) * 1000.0))
