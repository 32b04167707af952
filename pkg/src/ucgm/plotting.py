"""SVG plots for samples and sampling trajectories.

Everything renders through the Agg backend so the CLI works headless. Only
two views are needed: a scatter of final samples (1D data gets a histogram
instead) and the per-step trajectory fan from a sampling history.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["plot_samples", "plot_trajectories"]


def plot_samples(points, path, title: str = "", reference=None) -> None:
    """Scatter (2D) or histogram (1D) of sample points, saved as SVG.

    Args:
        points: (n, d) array with d in {1, 2}.
        path: Output file; the suffix decides the format (use .svg).
        title: Optional axes title.
        reference: Optional second cloud drawn underneath for comparison.
    """
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] not in (1, 2):
        raise ValueError("expected an (n, 1) or (n, 2) array")
    fig, ax = plt.subplots(figsize=(5, 5))
    try:
        if points.shape[1] == 1:
            if reference is not None:
                ax.hist(np.asarray(reference).reshape(-1), bins=80,
                        density=True, alpha=0.45, label="reference")
            ax.hist(points[:, 0], bins=80, density=True, alpha=0.65,
                    label="samples")
            ax.legend(loc="best", fontsize=8)
        else:
            if reference is not None:
                ref = np.asarray(reference)
                ax.scatter(ref[:, 0], ref[:, 1], s=4, alpha=0.25,
                           color="gray", label="reference")
            ax.scatter(points[:, 0], points[:, 1], s=4, alpha=0.6,
                       label="samples")
            ax.legend(loc="best", fontsize=8)
            ax.set_aspect("equal", adjustable="datalim")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)


def plot_trajectories(history, path, title: str = "",
                      max_paths: int = 64) -> None:
    """Draw per-sample paths across sampler steps, saved as SVG.

    Args:
        history: (steps + 1, n, d) array as returned by the sampler trace.
        path: Output file (use .svg).
        title: Optional axes title.
        max_paths: Cap on the number of individual paths drawn.
    """
    history = np.asarray(history)
    if history.ndim != 3:
        raise ValueError("expected a (steps + 1, n, d) history")
    steps, n, dim = history.shape
    keep = min(n, max_paths)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        if dim == 1:
            xs = np.arange(steps)
            for j in range(keep):
                ax.plot(xs, history[:, j, 0], lw=0.7, alpha=0.5)
            ax.set_xlabel("step")
            ax.set_ylabel("x")
        elif dim == 2:
            for j in range(keep):
                ax.plot(history[:, j, 0], history[:, j, 1], lw=0.7,
                        alpha=0.45)
            ax.scatter(history[-1, :keep, 0], history[-1, :keep, 1], s=8,
                       color="black", zorder=3)
            ax.set_aspect("equal", adjustable="datalim")
        else:
            raise ValueError("trajectory plots support d in {1, 2}")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
