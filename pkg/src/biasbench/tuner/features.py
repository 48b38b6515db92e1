"""Observation normalization and tiled feature extraction.

Hot pixels push raw counts orders of magnitude above the rest of the frame,
so a plain divide-by-max normalization would crush the useful dynamic range.
Instead the lowest 90% of per-pixel counts scale linearly to [0, 0.9] and
the top 10% to (0.9, 1.0]: outliers remain visible without dominating.

The default per-tile descriptor is a deterministic pooled-statistics vector,
which keeps training reproducible with no pretrained weights; heavier
embedding extractors can be registered under their own id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import AccumulatedFrame


def _normalize_channel(counts: np.ndarray) -> np.ndarray:
    v = counts.astype(np.float64)
    flat = np.sort(v.ravel())
    n = flat.size
    q = flat[int(math.ceil(0.9 * n)) - 1]  # nearest-rank 90th percentile
    vmax = flat[-1]
    out = np.zeros_like(v)
    if q > 0:
        low = v <= q
        out[low] = 0.9 * v[low] / q
    else:
        low = v <= 0.0
    high = ~low
    if vmax > q:
        out[high] = 0.9 + 0.1 * (v[high] - q) / (vmax - q)
    return out


def normalize_frame(frame: AccumulatedFrame) -> np.ndarray:
    """Both channels mapped into [0, 1]; shape (2, H, W), ON first."""
    return np.stack([_normalize_channel(frame.on_counts), _normalize_channel(frame.off_counts)])


def _pooled_stats(tile: np.ndarray) -> list[float]:
    """7 deterministic statistics of one normalized channel tile."""
    total = float(tile.sum())
    h, w = tile.shape
    if total > 0:
        ys, xs = np.mgrid[0:h, 0:w]
        com_x = float((tile * xs).sum() / total / max(w - 1, 1))
        com_y = float((tile * ys).sum() / total / max(h - 1, 1))
    else:
        com_x = com_y = 0.0
    if h > 1 or w > 1:
        gx = np.abs(np.diff(tile, axis=1))
        gy = np.abs(np.diff(tile, axis=0))
        grad = float((gx.sum() + gy.sum()) / max(gx.size + gy.size, 1))
    else:
        grad = 0.0
    return [
        float(tile.mean()),
        float(tile.std()),
        float(tile.max()),
        float(np.count_nonzero(tile) / tile.size),
        com_x,
        com_y,
        grad,
    ]


# extractor id -> (per-tile-channel descriptor, descriptor length)
EXTRACTORS: dict[str, tuple[Callable[[np.ndarray], list[float]], int]] = {
    "pooled-stats": (_pooled_stats, 7),
}


def register_extractor(name: str, fn: Callable[[np.ndarray], list[float]], dim: int) -> None:
    """Plug in an alternative per-tile descriptor (e.g. a pretrained
    embedding applied tile-wise)."""
    EXTRACTORS[name] = (fn, dim)


@dataclass(frozen=True)
class FeatureConfig:
    tile_grid: tuple[int, int] = (4, 4)  # (rows, cols)
    extractor: str = "pooled-stats"
    window_us: int = 8000

    @property
    def dim(self) -> int:
        if self.extractor not in EXTRACTORS:
            raise ValueError(f"unknown extractor id {self.extractor!r}")
        _, d = EXTRACTORS[self.extractor]
        return self.tile_grid[0] * self.tile_grid[1] * 2 * d


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    tile_grid: tuple[int, int]
    extractor: str
    window_us: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def _pad_to_tiles(ch: np.ndarray, rows: int, cols: int) -> np.ndarray:
    h, w = ch.shape
    ph = (rows - h % rows) % rows
    pw = (cols - w % cols) % cols
    if ph or pw:
        ch = np.pad(ch, ((0, ph), (0, pw)))
    return ch


def extract_features(frame: AccumulatedFrame, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Normalize, split into tiles, and describe each tile per channel.

    Layout: tiles in row-major order; per tile the ON descriptor then the
    OFF descriptor.  Shifting all events by exactly one tile therefore
    permutes whole tile blocks of the output.
    """
    if cfg.extractor not in EXTRACTORS:
        raise ValueError(f"unknown extractor id {cfg.extractor!r}")
    desc, _ = EXTRACTORS[cfg.extractor]
    rows, cols = cfg.tile_grid
    norm = normalize_frame(frame)
    values: list[float] = []
    chans = [_pad_to_tiles(norm[0], rows, cols), _pad_to_tiles(norm[1], rows, cols)]
    th = chans[0].shape[0] // rows
    tw = chans[0].shape[1] // cols
    for r in range(rows):
        for c in range(cols):
            for ch in chans:
                tile = ch[r * th : (r + 1) * th, c * tw : (c + 1) * tw]
                values.extend(desc(tile))
    return FeatureVector(
        values=np.array(values), tile_grid=cfg.tile_grid, extractor=cfg.extractor, window_us=cfg.window_us
    )


class TileFeatureExtractor:
    """Estimator-style wrapper so the pipeline composes with scikit-learn
    style tooling: ``transform`` maps accumulated frames to feature rows."""

    def __init__(self, tile_grid=(4, 4), extractor="pooled-stats", window_us=8000):
        self.tile_grid = tuple(tile_grid)
        self.extractor = extractor
        self.window_us = int(window_us)

    @property
    def config(self) -> FeatureConfig:
        return FeatureConfig(self.tile_grid, self.extractor, self.window_us)

    @property
    def dim(self) -> int:
        return self.config.dim

    def fit(self, frames=None, y=None):
        # stateless; present for pipeline compatibility
        self.config.dim
        return self

    def transform(self, frames) -> np.ndarray:
        if isinstance(frames, AccumulatedFrame):
            frames = [frames]
        return np.stack([extract_features(f, self.config).values for f in frames])

    def fit_transform(self, frames, y=None) -> np.ndarray:
        return self.fit(frames).transform(frames)

    def get_params(self, deep: bool = True) -> dict:
        return {
            "tile_grid": self.tile_grid,
            "extractor": self.extractor,
            "window_us": self.window_us,
        }

    def set_params(self, **params) -> "TileFeatureExtractor":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        self.tile_grid = tuple(self.tile_grid)
        return self
