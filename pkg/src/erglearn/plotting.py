"""Figure rendering for learned densities, rollouts, and mode comparisons.

All figures are written to files (Agg backend); the CLI report paths call
these next to the CSV outputs.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spectral import grid_cell_centers, reconstruct_density
from .task_learning import TaskDefinition

AXIS_LABELS = {
    "cartpole": ("pole angle [rad]", "pole rate [rad/s]"),
    "planar": ("x [m]", "y [m]"),
}


def density_figure(path, task: TaskDefinition, resolution: int = 64, demos=None,
                   trajectory=None, system: str | None = None, clip: bool = False,
                   title: str | None = None):
    """Heatmap of the learned density with optional demo/rollout overlays."""
    grid = reconstruct_density(task.phi, resolution, clip_negative=clip)
    axes = grid_cell_centers(task.domain, resolution)
    fig, ax = plt.subplots(figsize=(6.0, 4.8))
    extent = (
        task.domain.lower[0],
        task.domain.upper[0],
        task.domain.lower[1],
        task.domain.upper[1],
    )
    vmax = np.abs(grid).max() or 1.0
    cmap = "viridis" if clip else "RdBu_r"
    vmin = 0.0 if clip else -vmax
    im = ax.imshow(
        grid.T, origin="lower", extent=extent, aspect="auto", cmap=cmap,
        vmin=vmin, vmax=None if clip else vmax,
    )
    fig.colorbar(im, ax=ax, label="density")
    if demos is not None:
        for demo in demos:
            pts = demo.states[:, list(task.projection)]
            color = "k" if demo.label == "positive" else "crimson"
            ax.plot(pts[:, 0], pts[:, 1], color=color, lw=0.5, alpha=0.6)
    if trajectory is not None:
        pts = np.atleast_2d(trajectory)
        ax.plot(pts[:, 0], pts[:, 1], color="w", lw=0.9, alpha=0.9)
        ax.scatter(pts[::25, 0], pts[::25, 1], s=3, c="k", zorder=3)
    labels = AXIS_LABELS.get(system or "", ("dim 0", "dim 1"))
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(title or f"{task.mode} task definition")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def rollout_figure(path, times, states, system: str, eps_running=None,
                   success_mask=None, title: str | None = None):
    """Time series of the projected state with the running ergodic distance."""
    n_rows = 2 if eps_running is not None else 1
    fig, axes = plt.subplots(n_rows, 1, figsize=(7.0, 2.6 * n_rows), sharex=True)
    axes = np.atleast_1d(axes)
    if system == "cartpole":
        axes[0].plot(times, states[:, 0], lw=0.8, label="angle")
        axes[0].plot(times, states[:, 1], lw=0.8, label="rate", alpha=0.7)
        if success_mask is not None and success_mask.any():
            axes[0].fill_between(
                times, *axes[0].get_ylim(), where=success_mask,
                color="tab:green", alpha=0.18, label="success",
            )
    else:
        axes[0].plot(times, states[:, 0], lw=0.8, label="x")
        axes[0].plot(times, states[:, 1], lw=0.8, label="y", alpha=0.7)
    axes[0].legend(loc="upper right", fontsize=8)
    axes[0].set_ylabel("state")
    if eps_running is not None:
        axes[1].semilogy(times, np.maximum(eps_running, 1e-12), lw=0.9, color="tab:purple")
        axes[1].set_ylabel("running distance")
        axes[1].set_xlabel("time [s]")
    else:
        axes[0].set_xlabel("time [s]")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def compare_figure(path, per_mode: dict, metric_label: str, title: str | None = None):
    """Box plot of a metric across fusion modes (mirrors the mode comparisons)."""
    modes = [m for m in ("posonly", "negonly", "posneg") if m in per_mode]
    data = [np.asarray(per_mode[m], dtype=float) for m in modes]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    box = ax.boxplot(data, tick_labels=modes, showmeans=True, meanline=True)
    for line in box["medians"]:
        line.set_color("black")
    ax.set_ylabel(metric_label)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
