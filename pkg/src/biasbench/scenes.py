"""Procedural log-intensity scenes: a spinning-dot disk and a blinking LED board.

Scenes are pure functions of (t, x, y) with values in [0, 1]; edges are
anti-aliased by a 1 px linear blend.  Geometry defaults are derived from the
sensor size, so the same layout scales from the 128x128 desk sensor up to a
full-resolution sensor by changing one config value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SQUARE = "square"
SINE = "sine"
TRIANGLE = "triangle"

# Default LED frequency sets.  Squares stay well below the reciprocal of the
# default refractory period so every toggle can produce events.
SQUARE_FREQS = (80.0, 160.0, 240.0, 320.0)
SINE_TRIANGLE_FREQS_TRAIN = (1.0, 2.0, 5.0, 10.0, 20.0, 40.0)
SINE_TRIANGLE_FREQS_TEST = (1.5, 3.0, 7.0, 12.0, 25.0, 50.0)

# Dot reflectance presets: the grey dot must stay visible across the whole
# expert-optimal threshold range but vanish at high thresholds, while the
# black dot survives far larger ones.
GREY_DOT_INTENSITY = 0.24
BLACK_DOT_INTENSITY = 0.05


def _coverage(dist: np.ndarray, radius: float) -> np.ndarray:
    """Fraction of a pixel inside a disc edge, blended linearly over 1 px."""
    return np.clip(radius + 0.5 - dist, 0.0, 1.0)


@dataclass(frozen=True)
class SpinningDotScene:
    width: int = 128
    height: int = 128
    disk_center: tuple[float, float] = (64.0, 64.0)
    disk_radius: float = 56.0
    dot_radius: float = 6.0
    dot_orbit_radius: float = 30.0
    rotation_rate: float = 10.0  # revolutions per second
    background_intensity: float = 0.35
    disk_intensity: float = 0.9
    dot_intensity: float = GREY_DOT_INTENSITY

    def __post_init__(self):
        if self.dot_orbit_radius + self.dot_radius >= self.disk_radius:
            raise ValueError("dot orbit must stay strictly inside the disk")
        if self.rotation_rate <= 0:
            raise ValueError("rotation rate must be positive")

    @classmethod
    def preset(cls, width: int = 128, height: int = 128, dot: str = "grey") -> "SpinningDotScene":
        """Desk-style geometry scaled to the sensor; dot is 'grey' or 'black'."""
        s = min(width, height)
        return cls(
            width=width,
            height=height,
            disk_center=(width / 2.0, height / 2.0),
            disk_radius=0.4375 * s,
            dot_radius=0.047 * s,
            dot_orbit_radius=0.234 * s,
            dot_intensity=BLACK_DOT_INTENSITY if dot == "black" else GREY_DOT_INTENSITY,
        )

    def dot_center(self, t_us: int | float) -> tuple[float, float]:
        # reduce the phase before the trig calls so long recordings do not
        # accumulate angle error
        phase = math.fmod(self.rotation_rate * (t_us / 1e6), 1.0)
        angle = 2.0 * math.pi * phase
        cx, cy = self.disk_center
        return (cx + self.dot_orbit_radius * math.cos(angle),
                cy + self.dot_orbit_radius * math.sin(angle))

    def intensity(self, t_us, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        dx, dy = self.dot_center(t_us)
        cx, cy = self.disk_center
        d_disk = np.hypot(xs - cx, ys - cy)
        d_dot = np.hypot(xs - dx, ys - dy)
        out = self.background_intensity + _coverage(d_disk, self.disk_radius) * (
            self.disk_intensity - self.background_intensity
        )
        cov_dot = _coverage(d_dot, self.dot_radius)
        return out + cov_dot * (self.dot_intensity - out)

    def dynamic_bbox(self) -> tuple[int, int, int, int]:
        """Half-open (x0, y0, x1, y1) pixel box containing all time variation."""
        cx, cy = self.disk_center
        r = self.dot_orbit_radius + self.dot_radius + 2.0
        x0 = max(0, int(math.floor(cx - r)))
        y0 = max(0, int(math.floor(cy - r)))
        x1 = min(self.width, int(math.ceil(cx + r)) + 1)
        y1 = min(self.height, int(math.ceil(cy + r)) + 1)
        return (x0, y0, x1, y1)

    def tracking_roi(self) -> tuple[int, int, int, int]:
        """Square region inscribed in the disk, clear of the disk edge."""
        cx, cy = self.disk_center
        h = (self.dot_orbit_radius + self.dot_radius + 3.0)
        return (int(cx - h), int(cy - h), int(cx + h) + 1, int(cy + h) + 1)

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "width", "height", "disk_radius", "dot_radius", "dot_orbit_radius",
            "rotation_rate", "background_intensity", "disk_intensity", "dot_intensity")}
        d["disk_center"] = list(self.disk_center)
        d["kind"] = "spinning-dot"
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SpinningDotScene":
        d = dict(d)
        d.pop("kind", None)
        d["disk_center"] = tuple(d["disk_center"])
        return cls(**d)


def waveform_value(kind: str, frequency: float, t_us, duty: float = 0.5):
    """Normalized brightness w(t) in [0, 1] for one LED drive waveform."""
    phase = np.mod(np.asarray(t_us, dtype=np.float64) * 1e-6 * frequency, 1.0)
    if kind == SINE:
        return 0.5 * (1.0 + np.sin(2.0 * np.pi * phase))
    if kind == TRIANGLE:
        return 1.0 - np.abs(2.0 * phase - 1.0)
    if kind == SQUARE:
        return (phase < duty).astype(np.float64)
    raise ValueError(f"unknown waveform {kind!r}")


@dataclass(frozen=True)
class LedSpec:
    center: tuple[float, float]
    radius: float
    waveform: str
    frequency: float
    duty: float = 0.5

    def to_json(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "waveform": self.waveform,
            "frequency": self.frequency,
            "duty": self.duty,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LedSpec":
        return cls(tuple(d["center"]), d["radius"], d["waveform"], d["frequency"], d.get("duty", 0.5))


@dataclass(frozen=True)
class LedBoardScene:
    """A 4x4 board: 4 square-wave LEDs on the top row, 6 sine on the lower
    left, 6 triangle on the lower right.  Sine and triangle waveforms are
    emitted pre-smoothed (the drive electronics integrate any PWM carrier),
    so no carrier is modeled."""

    width: int = 128
    height: int = 128
    leds: tuple[LedSpec, ...] = ()
    ambient_intensity: float = 0.05
    amplitude: float = 0.9

    @classmethod
    def preset(cls, width: int = 128, height: int = 128, split: str = "train") -> "LedBoardScene":
        freqs = SINE_TRIANGLE_FREQS_TRAIN if split == "train" else SINE_TRIANGLE_FREQS_TEST
        s = min(width, height)
        radius = 0.0625 * s
        coords = [s * (0.172 + 0.219 * i) for i in range(4)]
        leds: list[LedSpec] = []
        for i, f in enumerate(SQUARE_FREQS):
            leds.append(LedSpec((coords[i], coords[0]), radius, SQUARE, f))
        k = 0
        for row in range(1, 4):
            for col in range(2):
                leds.append(LedSpec((coords[col], coords[row]), radius, SINE, freqs[k]))
                k += 1
        k = 0
        for row in range(1, 4):
            for col in range(2, 4):
                leds.append(LedSpec((coords[col], coords[row]), radius, TRIANGLE, freqs[k]))
                k += 1
        return cls(width=width, height=height, leds=tuple(leds))

    def intensity(self, t_us, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        out = np.full(np.broadcast(xs, ys).shape, self.ambient_intensity, dtype=np.float64)
        for led in self.leds:
            cov = _coverage(np.hypot(xs - led.center[0], ys - led.center[1]), led.radius)
            if not np.any(cov):
                continue
            w = waveform_value(led.waveform, led.frequency, t_us, led.duty)
            level = self.ambient_intensity + self.amplitude * w
            out = out + cov * (level - out)
        return out

    def dynamic_bbox(self) -> tuple[int, int, int, int]:
        x0 = min(led.center[0] - led.radius for led in self.leds) - 2
        y0 = min(led.center[1] - led.radius for led in self.leds) - 2
        x1 = max(led.center[0] + led.radius for led in self.leds) + 2
        y1 = max(led.center[1] + led.radius for led in self.leds) + 2
        return (max(0, int(x0)), max(0, int(y0)),
                min(self.width, int(math.ceil(x1)) + 1), min(self.height, int(math.ceil(y1)) + 1))

    def led_roi(self, index: int) -> tuple[int, int, int, int]:
        """Half-open pixel box around one LED, with a 2 px margin."""
        led = self.leds[index]
        r = led.radius + 2.0
        return (max(0, int(led.center[0] - r)), max(0, int(led.center[1] - r)),
                min(self.width, int(led.center[0] + r) + 1), min(self.height, int(led.center[1] + r) + 1))

    def to_json(self) -> dict:
        return {
            "kind": "led-board",
            "width": self.width,
            "height": self.height,
            "ambient_intensity": self.ambient_intensity,
            "amplitude": self.amplitude,
            "leds": [led.to_json() for led in self.leds],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LedBoardScene":
        return cls(
            width=d["width"],
            height=d["height"],
            ambient_intensity=d.get("ambient_intensity", 0.05),
            amplitude=d.get("amplitude", 0.9),
            leds=tuple(LedSpec.from_json(e) for e in d["leds"]),
        )


Scene = SpinningDotScene | LedBoardScene

SCENE_IDS = (
    "spinning-dot",
    "spinning-dot-grey",
    "spinning-dot-black",
    "led-board",
    "led-board-train",
    "led-board-test",
)


def make_scene(scene_id: str, width: int = 128, height: int = 128) -> Scene:
    if scene_id in ("spinning-dot", "spinning-dot-grey"):
        return SpinningDotScene.preset(width, height, dot="grey")
    if scene_id == "spinning-dot-black":
        return SpinningDotScene.preset(width, height, dot="black")
    if scene_id in ("led-board", "led-board-train"):
        return LedBoardScene.preset(width, height, split="train")
    if scene_id == "led-board-test":
        return LedBoardScene.preset(width, height, split="test")
    raise ValueError(f"unknown scene id {scene_id!r} (known: {', '.join(SCENE_IDS)})")


def scene_from_json(d: dict) -> Scene:
    kind = d.get("kind")
    if kind == "spinning-dot":
        return SpinningDotScene.from_json(d)
    if kind == "led-board":
        return LedBoardScene.from_json(d)
    raise ValueError(f"unknown scene kind {kind!r}")


def load_scene(path: str | Path) -> Scene:
    return scene_from_json(json.loads(Path(path).read_text()))
