"""Recording-backed MDP environment.

State is the observed event stream at the current bias tuple; actions are
relative threshold changes; transitions swap in the recording captured at
the nearest grid tuple.  The environment intentionally returns no reward:
callers that want a score run a metric on the observation themselves.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AccumulatedFrame, BiasSettings, EventRecording, accumulate
from .fileio import DatasetManifest, read_recording
from .grid import BiasGrid, snap_to_grid


@dataclass(frozen=True)
class BiasAction:
    """Relative bias change (a, b, 0, 0, 0): a moves diff_off, b moves
    diff_on; the remaining three axes are not tunable through actions."""

    d_off: int = 0
    d_on: int = 0

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (int(self.d_off), int(self.d_on), 0, 0, 0)

    @classmethod
    def from_tuple(cls, values) -> "BiasAction":
        vals = [int(v) for v in values]
        if len(vals) != 5:
            raise ValueError(f"action tuple needs 5 components, got {len(vals)}")
        if any(vals[2:]):
            raise ValueError(f"last three action components must be zero, got {vals}")
        return cls(vals[0], vals[1])

    def apply_to(self, b: BiasSettings) -> BiasSettings:
        return BiasSettings(
            diff_on=b.diff_on + self.d_on,
            diff_off=b.diff_off + self.d_off,
            fo=b.fo,
            hpf=b.hpf,
            refr=b.refr,
        )


class MdpEnv:
    """File-swap environment over one recorded corpus.

    Each step snaps the requested tuple to the grid, loads that recording,
    and returns the ON/OFF histogram of one random accumulation window,
    which injects the frame-to-frame variability a live sensor would show.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        root: str | Path,
        start: BiasSettings | None = None,
        window_us: int = 8000,
        seed: int = 0,
        cache_size: int = 16,
    ):
        self.manifest = manifest
        self.root = Path(root)
        self.grid = BiasGrid.from_dict(manifest.grid)
        self.window_us = int(window_us)
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)
        self._cache: OrderedDict[tuple, EventRecording] = OrderedDict()
        self._cache_size = cache_size
        self.current = snap_to_grid(start if start is not None else BiasSettings(), self.grid)

    def reset(self, start: BiasSettings, reseed: int | None = None) -> AccumulatedFrame:
        self.current = snap_to_grid(start, self.grid)
        if reseed is not None:
            self.seed = int(reseed)
            self._rng = np.random.default_rng(self.seed)
        return self.observe()

    def recording(self, biases: BiasSettings | None = None) -> EventRecording:
        b = self.current if biases is None else biases
        key = b.as_tuple()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        entry = self.manifest.entry_for(b)
        rec = read_recording(self.root / entry.path, scene_id=self.manifest.scene_id)
        self._cache[key] = rec
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return rec

    def observe(self) -> AccumulatedFrame:
        """One accumulation window at a uniformly random start time."""
        rec = self.recording()
        hi = rec.duration_us - self.window_us
        start = int(self._rng.integers(0, hi + 1))
        return accumulate(rec, start, self.window_us)

    def step(self, action: BiasAction) -> tuple[AccumulatedFrame, BiasSettings]:
        """Apply a relative action; returns (observation, new bias tuple)."""
        self.current = snap_to_grid(action.apply_to(self.current), self.grid)
        return self.observe(), self.current
