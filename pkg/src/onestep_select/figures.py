"""Headless matplotlib renderings saved next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def inclusion_bar(probs, path, title="Posterior inclusion probabilities"):
    """Bar chart of per-coordinate inclusion probabilities."""
    probs = np.asarray(probs, dtype=float)
    fig, ax = plt.subplots(figsize=(max(4.0, min(12.0, 0.12 * probs.size)), 3.2))
    ax.bar(np.arange(1, probs.size + 1), probs, width=0.9, color="#33658a")
    ax.axhline(0.5, color="#d1495b", lw=1.0, ls="--")
    ax.set_xlabel("coordinate")
    ax.set_ylabel("inclusion probability")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    return _finish(fig, path)


def f1_boxplot(groups, path, title="Support recovery across replications"):
    """Boxplot of F1 values; groups maps label -> list of values."""
    labels = list(groups)
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(labels), 3.6))
    ax.boxplot([groups[k] for k in labels], tick_labels=labels, whis=(0, 100))
    ax.set_ylabel("F1")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title(title)
    return _finish(fig, path)


def decay_curves(curves, path, threshold=None, labels=None,
                 title="Distance-to-stationarity bound"):
    """Step plot of one or more bound/TV curves against time."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for i, c in enumerate(curves):
        c = np.asarray(c, dtype=float)
        lbl = labels[i] if labels else None
        ax.step(np.arange(c.size), c, where="post", lw=1.2, label=lbl,
                alpha=0.9 if labels else 0.45, color=None if labels else "#33658a")
    if threshold is not None:
        ax.axhline(threshold, color="#d1495b", lw=1.0, ls="--")
    ax.set_xlabel("step")
    ax.set_ylabel("bound")
    ax.set_ylim(bottom=0)
    if labels:
        ax.legend(frameon=False, fontsize=8)
    ax.set_title(title)
    return _finish(fig, path)
