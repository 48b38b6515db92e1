"""Policy evaluation: convergence maps and the object-tracker experiment."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core import BiasSettings, accumulate
from ..env import MdpEnv
from ..fileio import DatasetManifest, read_recording
from ..metrics.tracking import (
    dot_expected_path,
    dot_tracker_config,
    track_spatters,
    tracking_metrics,
)
from .expert import OptimalRange
from .features import FeatureConfig, extract_features
from .policy import BCPolicy, policy_act


def convergence_map(
    policy: BCPolicy,
    manifest: DatasetManifest,
    root: str | Path,
    n_windows: int = 5,
    seed: int = 0,
    feature_cfg: FeatureConfig = FeatureConfig(),
    axes: tuple[str, str] = ("diff_off", "diff_on"),
):
    """Mean |d_off| + |d_on| the policy proposes per threshold grid cell.

    Cells near the scene's optimal settings should approach zero; values
    should grow with distance from them.  Returns (grid, axis0, axis1) in
    the heatmap convention.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    vals0 = list(manifest.grid[axes[0]])
    vals1 = list(manifest.grid[axes[1]])
    idx0 = {v: i for i, v in enumerate(vals0)}
    idx1 = {v: i for i, v in enumerate(vals1)}
    sums = np.zeros((len(vals0), len(vals1)))
    counts = np.zeros_like(sums)
    for entry in manifest.entries:
        rec = read_recording(root / entry.path)
        hi = rec.duration_us - feature_cfg.window_us
        cell = 0.0
        for _ in range(n_windows):
            start = int(rng.integers(0, hi + 1))
            frame = accumulate(rec, start, feature_cfg.window_us)
            action = policy_act(policy, extract_features(frame, feature_cfg))
            cell += abs(action.d_off) + abs(action.d_on)
        i = idx0[getattr(entry.biases, axes[0])]
        j = idx1[getattr(entry.biases, axes[1])]
        sums[i, j] += cell / n_windows
        counts[i, j] += 1
    return sums / np.maximum(counts, 1), vals0, vals1


def tracker_success_experiment(
    policy: BCPolicy,
    env: MdpEnv,
    scene,
    optimal: OptimalRange,
    starts: list[tuple[int, int]],
    n_runs: int = 10,
    tl_threshold: float = 0.75,
    window_us: int = 1000,
    feature_cfg: FeatureConfig = FeatureConfig(),
    seed: int = 0,
) -> dict[tuple[int, int], float]:
    """Per start point: fraction of runs where one policy step lands inside
    the optimal range with the dot still tracked (TL above threshold).

    Starts are (diff_off, diff_on) pairs.  Each run re-seeds the environment
    so the observed window differs run to run.
    """
    if n_runs <= 0:
        raise ValueError("n_runs must be positive")
    tl_cache: dict[tuple, float] = {}

    def tl_at(biases: BiasSettings) -> float:
        key = biases.as_tuple()
        if key not in tl_cache:
            rec = env.recording(biases)
            cfg = dot_tracker_config(scene, window_us)
            tracklets = track_spatters(rec, window_us, roi=scene.tracking_roi(), config=cfg)
            path = dot_expected_path(scene, window_us, rec.duration_us // window_us)
            tl_cache[key] = tracking_metrics(tracklets, path, r_dot=scene.dot_radius).tl
        return tl_cache[key]

    results: dict[tuple[int, int], float] = {}
    for start in starts:
        start_biases = BiasSettings(diff_on=start[1], diff_off=start[0])
        successes = 0
        for run in range(n_runs):
            obs = env.reset(start_biases, reseed=seed * 10_000 + run)
            action = policy_act(policy, extract_features(obs, feature_cfg))
            _, landed = env.step(action)
            if optimal.contains(landed) and tl_at(landed) > tl_threshold:
                successes += 1
        results[start] = successes / n_runs
    return results
