"""Figure rendering for CLI runs.

Every command that writes delimited output also renders a matplotlib figure
next to it, so a run directory is self-describing: curves for training runs,
scatter plots for 2-D embeddings, timing bars for benchmarks.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_training_curves(report, path) -> None:
    """Loss and accuracy curves per epoch for a finished training run."""
    epochs = [r.epoch for r in report.epochs]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.train_loss for r in report.epochs],
                 label="total", color="tab:blue")
    ax_loss.plot(epochs, [r.gcn_loss for r in report.epochs],
                 label="classification", color="tab:orange")
    ax_loss.plot(epochs, [r.lpa_loss for r in report.epochs],
                 label="propagation", color="tab:green")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(fontsize=8)
    for name, color in (("train_acc", "tab:blue"), ("val_acc", "tab:orange"),
                        ("test_acc", "tab:green")):
        ax_acc.plot(epochs, [getattr(r, name) for r in report.epochs],
                    label=name, color=color)
    if report.best_epoch >= 0:
        ax_acc.axvline(report.best_epoch, ls=":", color="gray",
                       label="best epoch")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0, 1.02)
    ax_acc.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_embedding_scatter(embedding, labels, title, path) -> None:
    """2-D embedding scatter colored by class label."""
    embedding = np.asarray(embedding)
    if embedding.shape[1] != 2:
        raise ValueError(f"scatter needs 2-D embeddings, got {embedding.shape}")
    fig, ax = plt.subplots(figsize=(4.5, 4))
    for cls in np.unique(labels):
        pts = embedding[labels == cls]
        ax.scatter(pts[:, 0], pts[:, 1], s=30, label=f"class {cls}")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_plot(rows, path) -> None:
    """Per-epoch timing of the plain and joint models against graph size.

    `rows` holds dicts with keys n, gcn_ms_per_epoch, gcnlpa_ms_per_epoch;
    rows that errored out are skipped.
    """
    ok = [r for r in rows if "error" not in r]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if ok:
        ns = [r["n"] for r in ok]
        ax.plot(ns, [r["gcn_ms_per_epoch"] for r in ok], "o-", label="plain")
        ax.plot(ns, [r["gcnlpa_ms_per_epoch"] for r in ok], "s-",
                label="with edge learning")
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("nodes")
    ax.set_ylabel("ms / epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
