"""Two-axis aggregation of cached per-recording metrics."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..fileio import DatasetManifest


def metric_heatmap(
    manifest: DatasetManifest, metric: str, axes: tuple[str, str]
) -> tuple[np.ndarray, list[int], list[int]]:
    """Mean of one cached metric per (axes[0], axes[1]) cell, averaged over
    all remaining bias axes.  Returns (grid, axis0 values, axis1 values);
    grid[i, j] corresponds to (axis0[i], axis1[j])."""
    a0, a1 = axes
    for a in axes:
        if a not in manifest.grid:
            raise ValueError(f"unknown bias axis {a!r}")
    vals0 = list(manifest.grid[a0])
    vals1 = list(manifest.grid[a1])
    sums = np.zeros((len(vals0), len(vals1)))
    counts = np.zeros_like(sums)
    idx0 = {v: i for i, v in enumerate(vals0)}
    idx1 = {v: i for i, v in enumerate(vals1)}
    for e in manifest.entries:
        if metric not in e.metrics:
            raise ValueError(
                f"entry {e.biases.as_tuple()} has no cached metric {metric!r}"
            )
        i = idx0[getattr(e.biases, a0)]
        j = idx1[getattr(e.biases, a1)]
        sums[i, j] += float(e.metrics[metric])
        counts[i, j] += 1
    if (counts == 0).any():
        raise ValueError("manifest does not cover the full axis product")
    return sums / counts, vals0, vals1


def write_heatmap_csv(path: str | Path, grid: np.ndarray, vals0, vals1, axes: tuple[str, str]) -> None:
    lines = [f"{axes[0]}\\{axes[1]}," + ",".join(str(v) for v in vals1)]
    for v0, row in zip(vals0, grid):
        lines.append(f"{v0}," + ",".join(f"{x:.6g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def render_heatmap_png(
    path: str | Path,
    grid: np.ndarray,
    vals0,
    vals1,
    axes: tuple[str, str],
    title: str = "",
    log_scale: bool = False,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import LogNorm

    fig, ax = plt.subplots(figsize=(6, 5))
    norm = LogNorm() if log_scale and np.all(grid > 0) else None
    im = ax.imshow(grid, origin="lower", aspect="auto", norm=norm, cmap="viridis")
    ax.set_xticks(range(len(vals1)), [str(v) for v in vals1], rotation=90, fontsize=7)
    ax.set_yticks(range(len(vals0)), [str(v) for v in vals0], fontsize=7)
    ax.set_xlabel(axes[1])
    ax.set_ylabel(axes[0])
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
