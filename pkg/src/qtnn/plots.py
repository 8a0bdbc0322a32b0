"""Figure rendering for the report paths.

Every renderer writes a PNG next to the delimited output it illustrates. The
CSV files remain the deterministic record; figures are a convenience layer
and carry no metadata that would vary between identical runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVEFIG = dict(dpi=120, metadata={"Software": None})


def save_metrics_figure(history, path, title: str):
    """Accuracy and loss curves (train/test) for one run."""
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9, 3.5))
    epochs = [m.epoch for m in history]
    ax_acc.plot(epochs, [m.train_accuracy for m in history], label="train")
    ax_acc.plot(epochs, [m.test_accuracy for m in history], label="test")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.legend()
    ax_loss.plot(epochs, [m.train_loss for m in history], label="train")
    ax_loss.plot(epochs, [m.test_loss for m in history], label="test")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_comparison_figure(runs, path, split: str = "train"):
    """Overlayed accuracy curves for several labelled runs.

    runs: iterable of (label, history) pairs; split picks the accuracy
    column ('train' or 'test').
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, history in runs:
        key = "train_accuracy" if split == "train" else "test_accuracy"
        ax.plot([m.epoch for m in history],
                [getattr(m, key) for m in history], label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel(f"{split} accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_activation_figure(rows, path, v0: float, a: float):
    """Transmission and its derivative over the tabulated energy range."""
    es = [r[0] for r in rows]
    ts = [r[1] for r in rows]
    gs = [r[2] for r in rows]
    fig, (ax_t, ax_g) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_t.plot(es, ts)
    ax_t.axvline(v0, color="grey", lw=0.8, ls="--")
    ax_t.set_xlabel("E")
    ax_t.set_ylabel("T(E)")
    ax_t.set_ylim(-0.02, 1.05)
    ax_g.plot(es, gs)
    ax_g.axvline(v0, color="grey", lw=0.8, ls="--")
    ax_g.set_xlabel("E")
    ax_g.set_ylabel("dT/dE")
    fig.suptitle(f"barrier height {v0}, width {a}")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
