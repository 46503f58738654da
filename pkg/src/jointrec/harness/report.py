"""Delimited reports and their rendered figure counterparts."""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import field_magnitude

METRIC_CSV_HEADER = "sample_id,architecture,loss,metric,value"


def write_metrics_csv(path, rows):
    lines = [METRIC_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r['sample_id']},{r['architecture']},{r['loss']},{r['metric']},{r['value']:.8g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def render_loss_curves(history, path, title="training"):
    """Train/validation loss per epoch as a single figure file."""
    ep = [r["epoch"] for r in history]
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=110)
    ax.plot(ep, [r["train_loss"] for r in history], label="train", lw=1.6)
    ax.plot(ep, [r["val_loss"] for r in history], label="validation", lw=1.6)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_metric_panel(rows, path, title="evaluation"):
    """Box plot per metric over the per-sample rows (medians excluded)."""
    groups = {}
    for r in rows:
        if r["sample_id"] == "median" or not math.isfinite(r["value"]):
            continue
        groups.setdefault(r["metric"], []).append(r["value"])
    names = sorted(groups)
    if not names:
        names, groups = ["empty"], {"empty": [0.0]}
    fig, axes = plt.subplots(1, len(names), figsize=(2.2 * len(names) + 1, 3.6), dpi=110)
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        vals = groups[name]
        ax.boxplot(vals, widths=0.5)
        jitter = np.linspace(-0.12, 0.12, len(vals))
        ax.plot(1 + jitter, vals, ".", ms=3, alpha=0.5)
        ax.set_title(name, fontsize=9)
        ax.set_xticks([])
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_reconstruction(panels, path, title=None):
    """Side-by-side magnitude images; panels is a list of (label, field)."""
    fig, axes = plt.subplots(1, len(panels), figsize=(3.1 * len(panels), 3.4), dpi=110)
    if len(panels) == 1:
        axes = [axes]
    for ax, (label, field) in zip(axes, panels):
        mag = field_magnitude(field)
        ax.imshow(mag, cmap="gray")
        ax.set_title(label, fontsize=9)
        ax.axis("off")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
