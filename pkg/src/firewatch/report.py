"""Figure rendering for the report paths (training history, experiment results).

Uses the Agg backend so figures render to files on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ResultTable
from .training import TrainHistory


def plot_history(history: TrainHistory, path: str | Path) -> None:
    """Loss curves on top, learning rate + validation F1 below."""
    epochs = np.arange(len(history))
    rows = history.epochs
    fig, (ax_loss, ax_lr) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)

    for key, label in (("l_eo", "reconstruction"), ("l_lc", "land cover"),
                       ("l_cls", "hotspot"), ("l_tot", "total")):
        ax_loss.plot(epochs, [getattr(r, key) for r in rows], label=label)
    ax_loss.set_ylabel("loss")
    ax_loss.legend(loc="upper right", fontsize=8)
    ax_loss.grid(alpha=0.3)

    ax_lr.plot(epochs, [r.lr for r in rows], color="tab:gray", label="learning rate")
    ax_lr.set_ylabel("learning rate")
    ax_lr.set_xlabel("epoch")
    ax_lr.grid(alpha=0.3)
    ax_f1 = ax_lr.twinx()
    ax_f1.plot(epochs, [r.val_f1 for r in rows], color="tab:green", label="validation F1")
    ax_f1.set_ylabel("validation F1")
    ax_f1.set_ylim(0.0, 1.05)

    handles1, labels1 = ax_lr.get_legend_handles_labels()
    handles2, labels2 = ax_f1.get_legend_handles_labels()
    ax_lr.legend(handles1 + handles2, labels1 + labels2, loc="lower right", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_results(results: ResultTable, path: str | Path) -> None:
    """Grouped validation/test F1 bars with std error bars, one group per scheduler."""
    names = [r.scheduler for r in results.rows]
    x = np.arange(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(1.6 * len(names) + 2.5, 4))
    ax.bar(x - width / 2, [r.val_mean for r in results.rows], width,
           yerr=[r.val_std for r in results.rows], capsize=4, label="validation")
    ax.bar(x + width / 2, [r.test_mean for r in results.rows], width,
           yerr=[r.test_std for r in results.rows], capsize=4, label="test")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("F1")
    ax.set_ylim(0.0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


__all__ = ["plot_history", "plot_results"]
