"""Matplotlib renderings of reports, logs, forecasts, and heatmaps.

Only the CLI report path imports this module; metrics and training stay
free of any plotting dependency.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def metrics_figure(report, path):
    """Grouped ADE/FDE bars, one group per method, averaged over scenes."""
    names = sorted(report.methods)
    ades, fdes = [], []
    for n in names:
        a, f = report.methods[n].average()
        ades.append(a)
        fdes.append(f)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(names), 3.6))
    ax.bar(x - 0.18, ades, width=0.36, label="ADE")
    ax.bar(x + 0.18, fdes, width=0.36, label="FDE")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("meters")
    ax.set_title("average displacement errors")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def loss_curve_figure(log, path):
    epochs = [e.epoch for e in log.entries]
    losses = [e.loss for e in log.entries]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(epochs, losses, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def heatmap_figure(hm, path, obs=None):
    """Density image of a HeatmapGrid; optionally overlays the observed track."""
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    h, w = hm.counts.shape
    extent = (hm.origin[0], hm.origin[0] + w * hm.cell_size,
              hm.origin[1], hm.origin[1] + h * hm.cell_size)
    ax.imshow(hm.counts, origin="lower", extent=extent, cmap="hot",
              interpolation="nearest")
    if obs is not None:
        obs = np.asarray(obs)
        ax.plot(obs[:, 0], obs[:, 1], "-o", color="cyan", markersize=3,
                label="observed")
        ax.legend(loc="upper right")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("forecast density")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def forecast_figure(obs, samples, path, gt=None, steps=None):
    """Observed track plus K forecast trajectories (decoded steps only)."""
    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    obs = np.asarray(obs)
    ax.plot(obs[:, 0], obs[:, 1], "-o", color="black", markersize=3,
            label="observed")
    idx = None if steps is None else [s - 1 for s in steps]
    for i, traj in enumerate(samples):
        pts = np.asarray(traj) if idx is None else np.asarray(traj)[idx]
        ax.plot(pts[:, 0], pts[:, 1], "-", alpha=0.55,
                label="forecast" if i == 0 else None)
    if gt is not None:
        gt = np.asarray(gt)
        ax.plot(gt[:, 0], gt[:, 1], "--", color="green", label="ground truth")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.axis("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("trajectory forecast")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
