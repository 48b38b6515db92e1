"""Window-based blob tracker and the dot-tracking quality metrics.

Per accumulation window the event histogram is binarized, nearby active
pixels are merged (a small dilation bridges the gap between the leading and
trailing edge arcs a moving object produces), and 8-connected components
within an area band become detections.  Detections are greedily associated
to live tracklets by centroid distance.

The quality numbers for a scene with one known moving target:

    TF           tracklets associated with the target (1 = no fragmentation)
    TL           fraction of windows in which the target is tracked, [0, 1]
    N_tracklets  all tracklets, including noise-spawned ones
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from ..core import EventRecording, accumulate


@dataclass
class TrackerConfig:
    a_min: int = 4  # detections need at least this many active pixels
    a_max_frac: float = 0.25  # ... and at most this fraction of the roi
    merge_radius: int = 2  # dilation radius bridging split detections
    r_assoc: float = 6.0  # association gate, px
    m_miss: int = 5  # consecutive missed windows before a tracklet dies


def dot_tracker_config(scene, window_us: int = 1000) -> TrackerConfig:
    """Tracker constants for a spinning-dot scene: the association gate is
    1.5x the expected inter-window travel of the dot."""
    travel = 2.0 * math.pi * scene.rotation_rate * (window_us / 1e6) * scene.dot_orbit_radius
    return TrackerConfig(r_assoc=1.5 * travel)


@dataclass
class Tracklet:
    id: int
    windows: list[int] = field(default_factory=list)
    centroids: list[tuple[float, float]] = field(default_factory=list)

    @property
    def birth(self) -> int:
        return self.windows[0]

    @property
    def death(self) -> int:
        return self.windows[-1]

    def add(self, window: int, centroid: tuple[float, float]) -> None:
        self.windows.append(window)
        self.centroids.append(centroid)


@dataclass(frozen=True)
class TrackingMetrics:
    tf: int
    tl: float
    n_tracklets: int


def _detections(active: np.ndarray, cfg: TrackerConfig, roi_origin: tuple[int, int]):
    """Component centroids (sensor coordinates) for one binarized window."""
    if not active.any():
        return []
    if cfg.merge_radius > 0:
        size = 2 * cfg.merge_radius + 1
        merged = ndimage.binary_dilation(active, structure=np.ones((size, size), dtype=bool))
    else:
        merged = active
    labels, n = ndimage.label(merged, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return []
    labels = np.where(active, labels, 0)  # area/centroid use real event pixels only
    a_max = cfg.a_max_frac * active.size
    out = []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    ys, xs = np.nonzero(labels)
    lab_at = labels[ys, xs]
    sum_x = np.bincount(lab_at, weights=xs, minlength=n + 1)
    sum_y = np.bincount(lab_at, weights=ys, minlength=n + 1)
    for k in range(1, n + 1):
        area = counts[k]
        if cfg.a_min <= area <= a_max:
            out.append((sum_x[k] / area + roi_origin[0], sum_y[k] / area + roi_origin[1]))
    return out


def track_spatters(
    rec: EventRecording,
    window_us: int = 1000,
    roi: Optional[tuple[int, int, int, int]] = None,
    config: Optional[TrackerConfig] = None,
) -> list[Tracklet]:
    """Run the tracker over consecutive windows; returns every tracklet ever
    spawned, dead or alive."""
    cfg = config or TrackerConfig()
    if roi is None:
        roi = (0, 0, rec.width, rec.height)
    x0, y0, x1, y1 = roi
    if x0 >= x1 or y0 >= y1:
        raise ValueError(f"empty roi {roi}")
    n_windows = rec.duration_us // window_us

    done: list[Tracklet] = []
    live: list[tuple[Tracklet, int]] = []  # (tracklet, consecutive misses)
    next_id = 0

    for w in range(n_windows):
        frame = accumulate(rec, w * window_us, window_us)
        active = (frame.on_counts + frame.off_counts)[y0:y1, x0:x1] > 0
        dets = _detections(active, cfg, (x0, y0))

        # greedy nearest association within the gate
        pairs = []
        for ti, (trk, _) in enumerate(live):
            lx, ly = trk.centroids[-1]
            for di, (cx, cy) in enumerate(dets):
                d = math.hypot(cx - lx, cy - ly)
                if d <= cfg.r_assoc:
                    pairs.append((d, ti, di))
        pairs.sort(key=lambda p: p[0])
        used_t: set[int] = set()
        used_d: set[int] = set()
        for d, ti, di in pairs:
            if ti in used_t or di in used_d:
                continue
            used_t.add(ti)
            used_d.add(di)
            trk, _ = live[ti]
            trk.add(w, dets[di])
            live[ti] = (trk, 0)

        still_live = []
        for ti, (trk, miss) in enumerate(live):
            if ti in used_t:
                still_live.append((trk, 0))
            elif miss + 1 >= cfg.m_miss:
                done.append(trk)
            else:
                still_live.append((trk, miss + 1))
        live = still_live

        for di, det in enumerate(dets):
            if di not in used_d:
                trk = Tracklet(id=next_id)
                next_id += 1
                trk.add(w, det)
                live.append((trk, 0))

    done.extend(trk for trk, _ in live)
    done.sort(key=lambda t: t.id)
    return done


def dot_expected_path(scene, window_us: int, n_windows: int) -> np.ndarray:
    """(n_windows, 2) expected dot centroid per window, at window centers."""
    out = np.empty((n_windows, 2), dtype=np.float64)
    for w in range(n_windows):
        out[w] = scene.dot_center(w * window_us + window_us / 2.0)
    return out


def tracking_metrics(
    tracklets: list[Tracklet],
    dot_path: np.ndarray,
    r_dot: float = 6.0,
    min_on_path_frac: float = 0.7,
) -> TrackingMetrics:
    """Score tracklets against the expected target path.

    A tracklet is target-associated when at least ``min_on_path_frac`` of its
    centroids lie within ``r_dot`` of the expected position for their window;
    TL is the covered fraction of all windows, unioned over associated
    tracklets.
    """
    n_windows = len(dot_path)
    covered: set[int] = set()
    tf = 0
    for trk in tracklets:
        if not trk.windows:
            continue
        hits = [
            w
            for w, (cx, cy) in zip(trk.windows, trk.centroids)
            if w < n_windows and math.hypot(cx - dot_path[w, 0], cy - dot_path[w, 1]) <= r_dot
        ]
        if len(hits) >= min_on_path_frac * len(trk.windows):
            tf += 1
            covered.update(hits)
    tl = len(covered) / n_windows if n_windows else 0.0
    return TrackingMetrics(tf=tf, tl=tl, n_tracklets=len(tracklets))
