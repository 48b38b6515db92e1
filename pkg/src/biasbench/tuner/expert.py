"""Scripted expert demonstrations.

The expert knows the interval of threshold settings that keep the target
visible with low noise for a given scene, and emits the relative change that
jumps from the current thresholds to the middle of that interval in one
step (clamped to the action scale).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import BiasSettings, accumulate
from ..env import BiasAction
from ..fileio import DatasetManifest, read_recording
from .features import FeatureConfig, FeatureVector, extract_features


@dataclass(frozen=True)
class OptimalRange:
    """Closed expert-optimal intervals for the two tunable thresholds."""

    diff_off: tuple[int, int]
    diff_on: tuple[int, int]

    def __post_init__(self):
        for lo, hi in (self.diff_off, self.diff_on):
            if lo > hi:
                raise ValueError(f"range [{lo}, {hi}] has lo > hi")

    def contains(self, b: BiasSettings) -> bool:
        return (
            self.diff_off[0] <= b.diff_off <= self.diff_off[1]
            and self.diff_on[0] <= b.diff_on <= self.diff_on[1]
        )

    def to_json(self) -> dict:
        return {"diff_off": list(self.diff_off), "diff_on": list(self.diff_on)}

    @classmethod
    def from_json(cls, d: dict) -> "OptimalRange":
        return cls(tuple(d["diff_off"]), tuple(d["diff_on"]))


# Desk-scale expert ranges: within them the grey dot is clearly visible and
# the stream stays quiet; the black dot tolerates higher thresholds.
DESK_OPTIMAL_RANGES = {
    "spinning-dot": OptimalRange(diff_off=(15, 65), diff_on=(40, 90)),
    "spinning-dot-grey": OptimalRange(diff_off=(15, 65), diff_on=(40, 90)),
    "spinning-dot-black": OptimalRange(diff_off=(40, 130), diff_on=(40, 115)),
}


def _axis_step(current: int, lo: int, hi: int, max_step: int) -> int:
    if lo <= current <= hi:
        return 0
    target = int(round((lo + hi) / 2.0))
    return int(np.clip(target - current, -max_step, max_step))


def scripted_expert(current: BiasSettings, optimal: OptimalRange, max_step: int = 125) -> BiasAction:
    """Relative change steering both thresholds toward the interval middle;
    zero on axes already inside their interval."""
    return BiasAction(
        d_off=_axis_step(current.diff_off, *optimal.diff_off, max_step),
        d_on=_axis_step(current.diff_on, *optimal.diff_on, max_step),
    )


@dataclass(frozen=True)
class Demonstration:
    features: FeatureVector
    action: BiasAction
    biases: BiasSettings
    scene_id: str
    annotator: str = "scripted"

    def to_json(self) -> dict:
        return {
            "features": [float(v) for v in self.features.values],
            "action": list(self.action.as_tuple()),
            "biases": self.biases.as_dict(),
            "scene_id": self.scene_id,
            "annotator": self.annotator,
        }

    @classmethod
    def from_json(cls, d: dict, feature_cfg: FeatureConfig | None = None) -> "Demonstration":
        cfg = feature_cfg or FeatureConfig()
        return cls(
            features=FeatureVector(
                np.array(d["features"]), cfg.tile_grid, cfg.extractor, cfg.window_us
            ),
            action=BiasAction.from_tuple(d["action"]),
            biases=BiasSettings.from_dict(d["biases"]),
            scene_id=d["scene_id"],
            annotator=d.get("annotator", "scripted"),
        )


def save_demonstrations(demos: list[Demonstration], path: str | Path) -> None:
    with open(path, "w") as fh:
        for d in demos:
            fh.write(json.dumps(d.to_json()) + "\n")


def load_demonstrations(path: str | Path, feature_cfg: FeatureConfig | None = None) -> list[Demonstration]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(Demonstration.from_json(json.loads(line), feature_cfg))
    return out


def build_demo_dataset(
    manifest: DatasetManifest,
    root: str | Path,
    optimal: OptimalRange,
    n_samples: int,
    seed: int = 0,
    feature_cfg: FeatureConfig = FeatureConfig(),
    max_step: int = 125,
) -> list[Demonstration]:
    """Random (grid tuple, accumulation window) draws with expert labels.

    Draws are uniform over manifest entries and window start times;
    deterministic given the seed.  Recordings are visited grouped so each
    file is read once.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    if n_samples == 0:
        return []
    entry_idx = rng.integers(0, len(manifest.entries), size=n_samples)
    frac = rng.random(n_samples)
    demos: list[Demonstration | None] = [None] * n_samples
    order = np.argsort(entry_idx, kind="stable")
    pos = 0
    while pos < len(order):
        e_i = int(entry_idx[order[pos]])
        entry = manifest.entries[e_i]
        rec = read_recording(root / entry.path)
        action = scripted_expert(entry.biases, optimal, max_step)
        hi = rec.duration_us - feature_cfg.window_us
        while pos < len(order) and int(entry_idx[order[pos]]) == e_i:
            i = int(order[pos])
            start = int(frac[i] * (hi + 1))
            frame = accumulate(rec, start, feature_cfg.window_us)
            demos[i] = Demonstration(
                features=extract_features(frame, feature_cfg),
                action=action,
                biases=entry.biases,
                scene_id=manifest.scene_id,
            )
            pos += 1
    return demos  # type: ignore[return-value]
