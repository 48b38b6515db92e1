"""Bias grids, grid-sweep recording, and snapping.

A grid stores explicit per-axis integer value lists (not start/step/count)
because equidistant selections over the published ranges round to uneven
integer spacings; the recorded values are what the corpus actually used.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BIAS_NAMES, BiasSettings
from .fileio import DatasetManifest, ManifestEntry, read_recording, write_recording
from .sim import SimConfig, simulate

AxisSpec = tuple[int, int, int]  # (start, end, count)


@dataclass(frozen=True)
class BiasGrid:
    """Explicit, strictly increasing value list per bias axis."""

    diff_on: tuple[int, ...]
    diff_off: tuple[int, ...]
    fo: tuple[int, ...]
    hpf: tuple[int, ...]
    refr: tuple[int, ...]

    def __post_init__(self):
        for name in BIAS_NAMES:
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ValueError(f"axis {name} is empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"axis {name} not strictly increasing: {vals}")

    def axis(self, name: str) -> tuple[int, ...]:
        return getattr(self, name)

    def size(self) -> int:
        return math.prod(len(self.axis(n)) for n in BIAS_NAMES)

    def tuples(self):
        for combo in itertools.product(*(self.axis(n) for n in BIAS_NAMES)):
            yield BiasSettings.from_tuple(combo)

    def contains(self, b: BiasSettings) -> bool:
        return all(getattr(b, n) in self.axis(n) for n in BIAS_NAMES)

    def as_dict(self) -> dict[str, list[int]]:
        return {n: list(self.axis(n)) for n in BIAS_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "BiasGrid":
        return cls(**{n: tuple(int(v) for v in d[n]) for n in BIAS_NAMES})

    def bias_ranges(self) -> dict[str, tuple[int, int]]:
        return {n: (self.axis(n)[0], self.axis(n)[-1]) for n in BIAS_NAMES}


def build_axis(start: int, end: int, count: int) -> tuple[int, ...]:
    """`count` integers linearly spaced over [start, end], rounded.

    Rounding collisions are an error: the grid needs distinct values, so the
    requested spacing must exceed one bias unit.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if start > end:
        raise ValueError("start must not exceed end")
    if count == 1:
        if start != end:
            raise ValueError("count=1 requires start == end")
        return (int(start),)
    vals = [int(round(v)) for v in np.linspace(start, end, count)]
    if len(set(vals)) != count:
        raise ValueError(
            f"axis [{start}, {end}] with {count} values collides after rounding; "
            "spacing must exceed 1"
        )
    return tuple(vals)


def build_grid(axes: dict[str, AxisSpec]) -> BiasGrid:
    """Build a grid from per-axis (start, end, count) triples."""
    missing = [n for n in BIAS_NAMES if n not in axes]
    if missing:
        raise ValueError(f"missing axis spec for {missing}")
    return BiasGrid(**{n: build_axis(*axes[n]) for n in BIAS_NAMES})


def spinning_dot_grid() -> BiasGrid:
    """Full-scale grid for the spinning-dot corpus (38,880 tuples)."""
    return build_grid({
        "diff_on": (-30, 130, 18),
        "diff_off": (-10, 190, 18),
        "fo": (-35, 55, 5),
        "hpf": (0, 120, 6),
        "refr": (-20, 200, 4),
    })


def led_board_grid() -> BiasGrid:
    """Full-scale grid for the LED-board corpus (30,976 tuples)."""
    return build_grid({
        "diff_on": (-80, 120, 11),
        "diff_off": (-30, 170, 11),
        "fo": (-29, 48, 8),
        "hpf": (4, 116, 8),
        "refr": (-15, 225, 4),
    })


def vo_arm_grid() -> BiasGrid:
    """Full-scale grid for the arm-trajectory corpus (6,750 tuples)."""
    return build_grid({
        "diff_on": (-50, 140, 15),
        "diff_off": (-10, 190, 15),
        "fo": (-30, 55, 5),
        "hpf": (0, 120, 6),
        "refr": (0, 0, 1),
    })


def desk_threshold_grid(count: int = 10) -> BiasGrid:
    """Desk-scale threshold sweep: `count` x `count` over both thresholds,
    other biases pinned at their defaults."""
    return build_grid({
        "diff_on": (-35, 190, count),
        "diff_off": (-35, 190, count),
        "fo": (0, 0, 1),
        "hpf": (0, 0, 1),
        "refr": (0, 0, 1),
    })


def _snap_axis(value: int, axis: tuple[int, ...]) -> int:
    best = axis[0]
    best_d = abs(value - best)
    for v in axis[1:]:
        d = abs(value - v)
        if d < best_d:  # ties keep the earlier (smaller) value
            best, best_d = v, d
    return best


def snap_to_grid(requested: BiasSettings, grid: BiasGrid) -> BiasSettings:
    """Per-axis nearest grid value; midpoint ties break toward the smaller."""
    return BiasSettings(
        **{n: _snap_axis(getattr(requested, n), grid.axis(n)) for n in BIAS_NAMES}
    )


# ---------------------------------------------------------------------------
# Grid sweep recording


def recording_filename(scene_id: str, b: BiasSettings) -> str:
    return (
        f"{scene_id}_on{b.diff_on}_off{b.diff_off}"
        f"_fo{b.fo}_hpf{b.hpf}_refr{b.refr}.bbe"
    )


def seed_for_tuple(master_seed: int, b: BiasSettings) -> int:
    """Stable per-tuple seed so grid points can be simulated in any order."""
    entropy = [master_seed & (2**63 - 1)] + [v + 2**15 for v in b.as_tuple()]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _entry_is_valid(path: Path, b: BiasSettings, cfg: SimConfig) -> bool:
    """Cheap resume check: header parses and matches the expected tuple."""
    if not path.exists():
        return False
    try:
        rec = read_recording(path)
    except Exception:
        return False
    return (
        rec.biases == b
        and rec.width == cfg.width
        and rec.height == cfg.height
        and rec.duration_us == cfg.duration_us
    )


def _record_one(args):
    scene, b, cfg_json, scene_id, out_path = args
    cfg = SimConfig.from_json(cfg_json)
    try:
        rec = simulate(scene, b, cfg, scene_id=scene_id)
        write_recording(rec, out_path)
    except Exception as exc:
        raise RuntimeError(f"simulation failed for biases {b.as_tuple()}: {exc}") from exc
    return len(rec.events)


def record_grid(
    scene,
    grid: BiasGrid,
    cfg: SimConfig,
    out_dir: str | Path,
    scene_id: str,
    parallel: int = 1,
    progress: bool = False,
) -> DatasetManifest:
    """Simulate one recording per grid tuple and write the corpus manifest.

    Resumable: grid points whose file already parses and matches are skipped.
    Per-tuple seeds derive from (cfg.seed, tuple), so partial and parallel
    runs produce the same corpus as a fresh sequential one.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ranges = grid.bias_ranges()
    todo = []
    entries = []
    for b in grid.tuples():
        tup_cfg = SimConfig.from_json(cfg.to_json())
        tup_cfg.seed = seed_for_tuple(cfg.seed, b)
        tup_cfg.bias_ranges = ranges
        tup_cfg.hpf_zero_level = grid.axis("hpf")[0]
        fname = recording_filename(scene_id, b)
        path = out / fname
        entries.append(ManifestEntry(biases=b, path=fname, duration_us=cfg.duration_us, seed=tup_cfg.seed))
        if not _entry_is_valid(path, b, tup_cfg):
            todo.append((scene, b, tup_cfg.to_json(), scene_id, str(path)))

    if todo:
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                for i, _ in enumerate(pool.map(_record_one, todo)):
                    if progress:
                        print(f"recorded {i + 1}/{len(todo)}", flush=True)
        else:
            for i, item in enumerate(todo):
                _record_one(item)
                if progress:
                    print(f"recorded {i + 1}/{len(todo)}", flush=True)

    manifest = DatasetManifest(scene_id=scene_id, grid=grid.as_dict(), entries=entries)
    manifest.validate()
    from .fileio import save_manifest

    save_manifest(manifest, out / "manifest.json")
    return manifest


def validity_summary(manifest: DatasetManifest, predicate) -> float:
    """Fraction of grid tuples whose cached metrics satisfy the predicate.

    Every entry must carry cached metrics; the predicate receives the
    entry's metrics dict and returns a bool.
    """
    if not manifest.entries:
        raise ValueError("manifest has no entries")
    missing = [e.biases.as_tuple() for e in manifest.entries if not e.metrics]
    if missing:
        raise ValueError(
            f"{len(missing)} entries have no cached metrics (first: {missing[0]}); "
            "run the metrics command with --cache first"
        )
    good = sum(1 for e in manifest.entries if predicate(e.metrics))
    return good / len(manifest.entries)
