"""Binary recording format, CSV export, and dataset manifests.

BBE1 layout (little-endian):

    magic "BBE1"      4 bytes
    version           u16 (= 1)
    width, height     u16, u16
    duration_us       u64
    seed              u64
    biases            5 x i16, tuple order (diff_on, diff_off, fo, hpf, refr)
    event count       u64
    events            count x 13-byte records {t_us u64, x u16, y u16, polarity u8}

The header is 44 bytes; reading back a written file reproduces the in-memory
recording exactly, and re-writing it reproduces the file byte for byte.
"""

from __future__ import annotations

import itertools
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .core import (
    BIAS_NAMES,
    EVENT_DTYPE,
    BiasSettings,
    EventRecording,
    FormatError,
)

MAGIC = b"BBE1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHHQQ5hQ")
HEADER_SIZE = _HEADER.size  # 44
EVENT_SIZE = EVENT_DTYPE.itemsize  # 13

PathOrFile = Union[str, Path, BinaryIO]


def _open(dest: PathOrFile, mode: str):
    if hasattr(dest, "read") or hasattr(dest, "write"):
        return dest, False
    return open(dest, mode), True


def write_recording(rec: EventRecording, dest: PathOrFile) -> int:
    """Serialize a recording; returns the number of bytes written.

    The recording is validated first so an unsorted or out-of-range stream
    is refused before any bytes are emitted.
    """
    rec.validate()
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        rec.width,
        rec.height,
        rec.duration_us,
        rec.seed,
        *rec.biases.as_tuple(),
        len(rec.events),
    )
    payload = rec.events.tobytes()
    fh, should_close = _open(dest, "wb")
    try:
        fh.write(header)
        fh.write(payload)
    finally:
        if should_close:
            fh.close()
    return len(header) + len(payload)


def read_recording(source: PathOrFile, scene_id: str = "") -> EventRecording:
    """Parse a BBE1 stream back into a validated EventRecording.

    The wire format carries no scene identifier; pass ``scene_id`` when the
    caller knows the provenance (e.g. from a manifest).
    """
    fh, should_close = _open(source, "rb")
    try:
        head = fh.read(HEADER_SIZE)
        if len(head) < 4 or head[:4] != MAGIC:
            raise FormatError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
        if len(head) < HEADER_SIZE:
            raise FormatError(f"truncated header: {len(head)} of {HEADER_SIZE} bytes")
        (_, version, width, height, duration_us, seed, b_on, b_off, b_fo, b_hpf, b_refr, count) = _HEADER.unpack(head)
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        payload = fh.read(count * EVENT_SIZE)
        if len(payload) != count * EVENT_SIZE:
            offset = HEADER_SIZE + len(payload)
            raise FormatError(
                f"truncated event data at byte {offset}: "
                f"expected {count} records ({count * EVENT_SIZE} bytes), got {len(payload)}"
            )
        extra = fh.read(1)
        if extra:
            raise FormatError(f"trailing bytes after {count} event records")
        events = np.frombuffer(payload, dtype=EVENT_DTYPE).copy()
        rec = EventRecording(
            width=width,
            height=height,
            duration_us=duration_us,
            biases=BiasSettings(b_on, b_off, b_fo, b_hpf, b_refr),
            scene_id=scene_id,
            seed=seed,
            events=events,
        )
    finally:
        if should_close:
            fh.close()
    try:
        rec.validate()
    except ValueError as exc:
        raise FormatError(f"stream decodes to an invalid recording: {exc}") from exc
    return rec


def write_events_csv(rec: EventRecording, dest: PathOrFile) -> int:
    """Debug-friendly CSV export of the event list."""
    lines = ["t_us,x,y,polarity"]
    for t, x, y, p in rec.events:
        lines.append(f"{t},{x},{y},{p}")
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)
    return len(text)


# --------------------------------------------------------------------------
# Dataset manifest


@dataclass
class ManifestEntry:
    biases: BiasSettings
    path: str
    duration_us: int
    seed: int
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {
            "biases": self.biases.as_dict(),
            "path": self.path,
            "duration_us": int(self.duration_us),
            "seed": int(self.seed),
        }
        if self.metrics:
            d["metrics"] = self.metrics
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ManifestEntry":
        return cls(
            biases=BiasSettings.from_dict(d["biases"]),
            path=d["path"],
            duration_us=int(d["duration_us"]),
            seed=int(d["seed"]),
            metrics=dict(d.get("metrics", {})),
        )


@dataclass
class DatasetManifest:
    """Index of one grid-sampled recording corpus.

    ``grid`` maps each bias name to its explicit, strictly increasing value
    list; ``entries`` holds exactly one recording per Cartesian grid tuple.
    """

    scene_id: str
    grid: dict[str, list[int]]
    entries: list[ManifestEntry] = field(default_factory=list)

    def grid_size(self) -> int:
        return math.prod(len(v) for v in self.grid.values())

    def tuples(self):
        """All grid tuples in row-major (diff_on fastest-last) order."""
        axes = [self.grid[name] for name in BIAS_NAMES]
        for combo in itertools.product(*axes):
            yield BiasSettings.from_tuple(combo)

    def entry_for(self, biases: BiasSettings) -> ManifestEntry:
        try:
            return self._index()[biases.as_tuple()]
        except KeyError:
            raise KeyError(f"manifest has no entry for biases {biases.as_tuple()}") from None

    def _index(self) -> dict:
        if not hasattr(self, "_by_tuple") or len(self._by_tuple) != len(self.entries):
            self._by_tuple = {e.biases.as_tuple(): e for e in self.entries}
        return self._by_tuple

    def validate(self) -> "DatasetManifest":
        for name in BIAS_NAMES:
            if name not in self.grid:
                raise FormatError(f"manifest grid missing axis {name}")
            vals = self.grid[name]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise FormatError(f"grid axis {name} not strictly increasing")
        expected = self.grid_size()
        if len(self.entries) != expected:
            raise FormatError(
                f"manifest has {len(self.entries)} entries, grid product is {expected}"
            )
        members = set()
        axes = {name: set(v) for name, v in self.grid.items()}
        for e in self.entries:
            key = e.biases.as_tuple()
            if key in members:
                raise FormatError(f"duplicate manifest entry for biases {key}")
            members.add(key)
            for name in BIAS_NAMES:
                if getattr(e.biases, name) not in axes[name]:
                    raise FormatError(f"entry biases {key} not on the grid ({name} axis)")
        return self

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "grid": {k: [int(v) for v in vals] for k, vals in self.grid.items()},
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        return cls(
            scene_id=d["scene_id"],
            grid={k: [int(v) for v in vals] for k, vals in d["grid"].items()},
            entries=[ManifestEntry.from_json(e) for e in d["entries"]],
        )


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    manifest.validate()
    Path(path).write_text(json.dumps(manifest.to_json(), indent=1))


def load_manifest(path: str | Path, validate: bool = True) -> DatasetManifest:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    manifest = DatasetManifest.from_json(doc)
    if validate:
        manifest.validate()
    return manifest
