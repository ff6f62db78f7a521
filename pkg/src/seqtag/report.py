"""Figure rendering for training runs and model comparisons.

Uses the Agg backend so figures render to files on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import MetricsReport
from .model import TrainingReport


def save_training_curves(report: TrainingReport, path, title: str | None = None) -> Path:
    """Plot mean training loss and validation weighted F1 per epoch, with
    the best epoch marked, and save as an image file."""
    if not report.epoch_losses:
        raise ValueError("empty training report")
    path = Path(path)
    epochs = range(1, len(report.epoch_losses) + 1)
    fig, ax_loss = plt.subplots(figsize=(7.0, 4.2))
    ax_loss.plot(epochs, report.epoch_losses, color="tab:blue", marker="o",
                 markersize=3, label="train loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean train NLL", color="tab:blue")
    ax_loss.tick_params(axis="y", labelcolor="tab:blue")

    ax_f1 = ax_loss.twinx()
    ax_f1.plot(epochs, report.val_f1, color="tab:red", marker="s",
               markersize=3, label="val weighted F1")
    ax_f1.set_ylabel("validation weighted F1 (%)", color="tab:red")
    ax_f1.tick_params(axis="y", labelcolor="tab:red")
    ax_f1.set_ylim(0.0, 102.0)

    if report.best_epoch:
        ax_loss.axvline(report.best_epoch, color="gray", linestyle="--",
                        linewidth=1, label=f"best epoch ({report.best_epoch})")
    if title:
        ax_loss.set_title(title)
    handles1, labels1 = ax_loss.get_legend_handles_labels()
    handles2, labels2 = ax_f1.get_legend_handles_labels()
    ax_loss.legend(handles1 + handles2, labels1 + labels2, loc="center right",
                   fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_comparison_chart(rows: list[tuple[str, MetricsReport]], path) -> Path:
    """Grouped bar chart of weighted precision/recall/F1 per model; the
    best-F1 bar gets an annotation."""
    if not rows:
        raise ValueError("no rows to plot")
    path = Path(path)
    names = [name for name, _ in rows]
    metrics = {
        "precision": [rep.precision for _, rep in rows],
        "recall": [rep.recall for _, rep in rows],
        "F1": [rep.f1 for _, rep in rows],
    }
    width = 0.26
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(rows)), 4.5))
    for i, (label, values) in enumerate(metrics.items()):
        xs = [j + (i - 1) * width for j in range(len(rows))]
        ax.bar(xs, values, width=width, label=label)
    best = max(range(len(rows)), key=lambda i: rows[i][1].f1)
    ax.annotate(
        f"best F1: {rows[best][1].f1:.1f}",
        xy=(best + width, rows[best][1].f1),
        xytext=(best + width, min(rows[best][1].f1 + 6.0, 106.0)),
        ha="center", fontsize=8,
        arrowprops={"arrowstyle": "->", "lw": 0.8},
    )
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("percent")
    ax.set_ylim(0.0, 112.0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
