"""Core domain types shared by every other module.

Events are kept in a packed numpy structured array whose dtype matches the
on-disk record layout byte for byte, so encoding/decoding is a memory copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

# Wire-compatible packed event record: t [us], x, y, polarity (0=OFF, 1=ON).
EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])

OFF = 0
ON = 1

# Biases are stored as i16 on disk; this is the hard legal envelope.
BIAS_MIN = -(2**15)
BIAS_MAX = 2**15 - 1

BIAS_NAMES = ("diff_on", "diff_off", "fo", "hpf", "refr")


class InvariantError(ValueError):
    """A domain value violates one of its structural invariants."""


class FormatError(ValueError):
    """A byte stream does not parse as a valid recording or manifest."""


@dataclass(frozen=True)
class BiasSettings:
    """The five-bias tuple governing event generation.

    Each field is an integer offset from the sensor default (0).  Order of
    the tuple form is (diff_on, diff_off, fo, hpf, refr).
    """

    diff_on: int = 0
    diff_off: int = 0
    fo: int = 0
    hpf: int = 0
    refr: int = 0

    def __post_init__(self):
        for name in BIAS_NAMES:
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise InvariantError(f"bias {name} must be an integer, got {v!r}")
            if not BIAS_MIN <= v <= BIAS_MAX:
                raise InvariantError(f"bias {name}={v} outside storable range")

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.diff_on, self.diff_off, self.fo, self.hpf, self.refr)

    def as_dict(self) -> dict[str, int]:
        return {name: int(getattr(self, name)) for name in BIAS_NAMES}

    @classmethod
    def from_tuple(cls, values: Iterable[int]) -> "BiasSettings":
        vals = [int(v) for v in values]
        if len(vals) != 5:
            raise InvariantError(f"expected 5 bias values, got {len(vals)}")
        return cls(*vals)

    @classmethod
    def from_dict(cls, d: dict) -> "BiasSettings":
        return cls(**{name: int(d[name]) for name in BIAS_NAMES})

    def shifted(self, deltas: Iterable[int]) -> "BiasSettings":
        """New settings with per-axis integer deltas added (tuple order)."""
        return BiasSettings.from_tuple(
            int(a) + int(b) for a, b in zip(self.as_tuple(), deltas)
        )


@dataclass(frozen=True)
class Event:
    """One asynchronous luminosity-change report."""

    t: int  # microseconds since recording start
    x: int
    y: int
    polarity: int  # ON or OFF


def events_array(events: Iterable[tuple[int, int, int, int]] | np.ndarray) -> np.ndarray:
    """Build a packed event array from (t, x, y, polarity) tuples."""
    if isinstance(events, np.ndarray):
        if events.dtype != EVENT_DTYPE:
            raise InvariantError(f"event array must have dtype {EVENT_DTYPE}")
        return events
    rows = list(events)
    arr = np.empty(len(rows), dtype=EVENT_DTYPE)
    for i, (t, x, y, p) in enumerate(rows):
        arr[i] = (t, x, y, p)
    return arr


def sort_events(arr: np.ndarray) -> np.ndarray:
    """Canonical event order: ascending (t, y, x, polarity)."""
    order = np.lexsort((arr["p"], arr["x"], arr["y"], arr["t"]))
    return arr[order]


@dataclass
class EventRecording:
    """A timestamped polarity-event stream plus sensor geometry and provenance."""

    width: int
    height: int
    duration_us: int
    biases: BiasSettings
    scene_id: str
    seed: int
    events: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=EVENT_DTYPE))

    def __post_init__(self):
        self.events = events_array(self.events)

    def validate(self) -> "EventRecording":
        """Check all structural invariants; returns self for chaining."""
        if self.width <= 0 or self.height <= 0:
            raise InvariantError("sensor dimensions must be positive")
        if self.duration_us <= 0:
            raise InvariantError("duration must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvariantError("seed must fit u64")
        ev = self.events
        if len(ev) == 0:
            return self
        if ev["t"].max() >= self.duration_us:
            raise InvariantError("event timestamp at or beyond recording duration")
        if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
            raise InvariantError("event coordinates outside sensor")
        if ev["p"].max() > 1:
            raise InvariantError("polarity must be 0 or 1")
        if len(ev) > 1:
            # strict total order on (t, y, x, p): adjacent keys must increase
            keys = (ev["t"], ev["y"], ev["x"], ev["p"])
            gt = np.zeros(len(ev) - 1, dtype=bool)
            ge = np.ones(len(ev) - 1, dtype=bool)
            for k in keys:
                a, b = k[:-1], k[1:]
                gt |= ge & (b > a)
                ge &= b >= a
            if not gt.all():
                raise InvariantError("events not strictly sorted by (t, y, x, polarity)")
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventRecording):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.duration_us == other.duration_us
            and self.biases == other.biases
            and self.scene_id == other.scene_id
            and self.seed == other.seed
            and len(self.events) == len(other.events)
            and bool(np.all(self.events == other.events))
        )


@dataclass
class AccumulatedFrame:
    """Per-pixel ON/OFF event counts over one accumulation window."""

    width: int
    height: int
    window_start_us: int
    window_length_us: int
    on_counts: np.ndarray
    off_counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.on_counts.sum() + self.off_counts.sum())


def accumulate(rec: EventRecording, window_start_us: int, window_length_us: int) -> AccumulatedFrame:
    """Count ON and OFF events per pixel in [window_start, window_start + length).

    The window must lie inside [0, duration].
    """
    if window_length_us <= 0:
        raise ValueError("window length must be positive")
    if window_start_us < 0 or window_start_us + window_length_us > rec.duration_us:
        raise ValueError(
            f"window [{window_start_us}, {window_start_us + window_length_us}) "
            f"outside recording duration {rec.duration_us}"
        )
    ev = rec.events
    lo = np.searchsorted(ev["t"], window_start_us, side="left")
    hi = np.searchsorted(ev["t"], window_start_us + window_length_us, side="left")
    window = ev[lo:hi]
    shape = (rec.height, rec.width)
    on = np.zeros(shape, dtype=np.uint32)
    off = np.zeros(shape, dtype=np.uint32)
    if len(window):
        flat = window["y"].astype(np.int64) * rec.width + window["x"]
        pos = window["p"] == ON
        n = rec.height * rec.width
        on += np.bincount(flat[pos], minlength=n).reshape(shape).astype(np.uint32)
        off += np.bincount(flat[~pos], minlength=n).reshape(shape).astype(np.uint32)
    return AccumulatedFrame(rec.width, rec.height, window_start_us, window_length_us, on, off)


def event_rate(rec: EventRecording) -> float:
    """Events per second over the whole recording."""
    if rec.duration_us <= 0:
        raise ValueError("duration must be positive")
    return len(rec.events) / (rec.duration_us / 1e6)


__all__ = [
    "EVENT_DTYPE",
    "ON",
    "OFF",
    "BIAS_NAMES",
    "BIAS_MIN",
    "BIAS_MAX",
    "InvariantError",
    "FormatError",
    "BiasSettings",
    "Event",
    "EventRecording",
    "AccumulatedFrame",
    "events_array",
    "sort_events",
    "accumulate",
    "event_rate",
]
