"""Per-pixel DVS circuit model: log intensity -> low-pass -> high-pass ->
threshold comparator with refractory dead time, plus background noise, leak
events, and hot pixels.

The sensor is sampled on a fixed tick grid and each pixel emits at most one
event per tick.  Rows are processed in fixed-height bands whose boundaries do
not depend on the worker count, and all randomness comes from per-row
streams, so output is byte-identical for any number of workers.

Background noise is produced by thinning a master arrival stream: candidate
arrivals depend only on (seed, row), and the acceptance probability scales
with the bias-dependent noise rate.  Raising a threshold therefore removes
noise events without ever introducing new ones, which keeps the event rate
monotone along the threshold axes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .core import (
    BIAS_MAX,
    BIAS_MIN,
    BIAS_NAMES,
    EVENT_DTYPE,
    ON,
    BiasSettings,
    EventRecording,
    sort_events,
)

_T_LAST_INIT = -(2**62)
_HOT_KEY = 7001
_NOISE_KEY = 1
_MISMATCH_KEY = 2


class BiasRangeError(ValueError):
    """A bias offset lies outside the configured legal range."""


@dataclass(frozen=True)
class PixelParams:
    """Physical pixel parameters derived from one bias tuple."""

    theta_on: float
    theta_off: float
    f_lp: float  # low-pass cutoff, Hz
    f_hp: float  # high-pass cutoff, Hz; 0 disables the filter
    t_refr_us: float
    lambda_noise: float  # per-pixel background event rate, Hz
    lambda_leak: float  # per-pixel ON-leak rate, Hz

    def __post_init__(self):
        if self.theta_on <= 0 or self.theta_off <= 0:
            raise ValueError("contrast thresholds must be positive")
        if self.f_lp <= 0 or self.f_hp < 0 or self.t_refr_us < 0:
            raise ValueError("f_lp must be positive; f_hp and t_refr non-negative")
        if self.lambda_noise < 0 or self.lambda_leak < 0:
            raise ValueError("rates must be non-negative")


@dataclass
class SimConfig:
    """Sensor geometry, sampling, and bias-to-parameter mapping constants.

    The mapping is exponential because biases offset transistor currents.
    Every constant is configurable so the mapping can be re-fitted to
    hardware measurements without touching the simulator itself.
    """

    width: int = 128
    height: int = 128
    duration_us: int = 1_000_000
    tick_us: int = 100
    seed: int = 0
    # bias -> parameter mapping
    theta0: float = 0.2
    theta_scale: float = 50.0
    f_lp0: float = 300.0
    fo_scale: float = 25.0
    f_hp0: float = 0.5
    hpf_scale: float = 20.0
    hpf_zero_level: Optional[int] = None  # b.hpf <= this disables the high-pass
    t_refr0_us: float = 1000.0
    refr_scale: float = 50.0
    # reference leak: the memorized level drifts toward the current signal
    # with this small-gap time constant, re-arming pixels whose
    # opposite-polarity threshold never fired and erasing content slower
    # than the drift.  Recovery speeds up super-linearly once the gap
    # exceeds mem_gap0 (junction leakage grows with the voltage across it),
    # so large post-excursion offsets clear within a few tens of ms while
    # sub-threshold accumulation from slow scenes is preserved.
    mem_tau_us: float = 150_000.0
    mem_gap0: float = 0.45
    # fixed-pattern comparator mismatch: per-pixel relative threshold spread,
    # seeded; de-phases quantization resonances the identical-pixel model
    # would otherwise show
    threshold_sigma: float = 0.03
    # noise / leak model
    noise_rate0: float = 16.0  # Hz per polarity term at zero threshold
    noise_theta: float = 0.1
    leak_rate: float = 0.05
    hot_pixel_fraction: float = 0.0005
    hot_pixel_multiplier: float = 1000.0
    log_eps: float = 1e-4
    band_rows: int = 64  # fixed banding; NOT tied to the worker count
    bias_ranges: Optional[dict[str, tuple[int, int]]] = None

    def __post_init__(self):
        if not 1 <= self.tick_us <= 1000:
            raise ValueError("tick_us must lie in [1, 1000]")
        if self.width <= 0 or self.height <= 0 or self.duration_us <= 0:
            raise ValueError("sensor dimensions and duration must be positive")
        if self.band_rows < 1:
            raise ValueError("band_rows must be at least 1")

    def legal_range(self, name: str) -> tuple[int, int]:
        if self.bias_ranges and name in self.bias_ranges:
            lo, hi = self.bias_ranges[name]
            return int(lo), int(hi)
        return (BIAS_MIN, BIAS_MAX)

    def to_json(self) -> dict:
        d = asdict(self)
        if d["bias_ranges"] is not None:
            d["bias_ranges"] = {k: list(v) for k, v in d["bias_ranges"].items()}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if d.get("bias_ranges"):
            d["bias_ranges"] = {k: (int(v[0]), int(v[1])) for k, v in d["bias_ranges"].items()}
        return cls(**d)


def bias_to_params(b: BiasSettings, cfg: SimConfig) -> PixelParams:
    """Map a bias tuple to physical pixel parameters."""
    for name in BIAS_NAMES:
        lo, hi = cfg.legal_range(name)
        v = getattr(b, name)
        if not lo <= v <= hi:
            raise BiasRangeError(f"bias {name}={v} outside legal range [{lo}, {hi}]")
    theta_on = cfg.theta0 * math.exp(b.diff_on / cfg.theta_scale)
    theta_off = cfg.theta0 * math.exp(b.diff_off / cfg.theta_scale)
    if cfg.hpf_zero_level is not None and b.hpf <= cfg.hpf_zero_level:
        f_hp = 0.0
    else:
        f_hp = cfg.f_hp0 * 2.0 ** (b.hpf / cfg.hpf_scale)
    lam = cfg.noise_rate0 * (
        math.exp(-theta_on / cfg.noise_theta) + math.exp(-theta_off / cfg.noise_theta)
    )
    return PixelParams(
        theta_on=theta_on,
        theta_off=theta_off,
        f_lp=cfg.f_lp0 * 2.0 ** (b.fo / cfg.fo_scale),
        f_hp=f_hp,
        t_refr_us=cfg.t_refr0_us * 2.0 ** (-b.refr / cfg.refr_scale),
        lambda_noise=lam,
        lambda_leak=cfg.leak_rate,
    )


def threshold_mismatch(cfg: SimConfig, y0: int, y1: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel relative threshold factors for rows [y0, y1), one field per
    comparator polarity.  Drawn from per-row streams, so banding does not
    change them; clipped at 3 sigma to keep thresholds positive."""
    on = np.empty((y1 - y0, cfg.width))
    off = np.empty((y1 - y0, cfg.width))
    s = cfg.threshold_sigma
    for y in range(y0, y1):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_MISMATCH_KEY, y)))
        z = rng.standard_normal((2, cfg.width))
        if s > 0:
            z = np.clip(z, -3.0, 3.0)
            on[y - y0] = 1.0 + s * z[0]
            off[y - y0] = 1.0 + s * z[1]
        else:
            on[y - y0] = 1.0
            off[y - y0] = 1.0
    return on, off


def hot_pixel_mask(cfg: SimConfig) -> np.ndarray:
    """Seeded boolean (H, W) mask of defective high-rate pixels."""
    n = cfg.width * cfg.height
    count = int(round(cfg.hot_pixel_fraction * n))
    mask = np.zeros(n, dtype=bool)
    if count:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_HOT_KEY,)))
        mask[rng.choice(n, size=count, replace=False)] = True
    return mask.reshape(cfg.height, cfg.width)


# ---------------------------------------------------------------------------
# Scene samplers: maintain the log-intensity grid of a row band, refreshing
# only pixels whose intensity can change between ticks.


class _GenericSampler:
    """Fallback: re-evaluates the scene over the whole band every tick."""

    def __init__(self, scene, x0, x1, y0, y1, log_eps):
        self.eps = log_eps
        self.xs, self.ys = np.meshgrid(
            np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64)
        )
        self.scene = scene
        self.log_i = np.log(scene.intensity(0, self.xs, self.ys) + log_eps)

    def update(self, t_us):
        np.log(self.scene.intensity(t_us, self.xs, self.ys) + self.eps, out=self.log_i)


class _DotSampler:
    """Spinning dot: composites the moving dot patch over a static base."""

    def __init__(self, scene, x0, x1, y0, y1, log_eps):
        self.scene = scene
        self.eps = log_eps
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        gx, gy = np.meshgrid(
            np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64)
        )
        cx, cy = scene.disk_center
        cov = np.clip(scene.disk_radius + 0.5 - np.hypot(gx - cx, gy - cy), 0.0, 1.0)
        self.base = scene.background_intensity + cov * (
            scene.disk_intensity - scene.background_intensity
        )
        self.log_base = np.log(self.base + log_eps)
        self.log_i = self.log_base.copy()
        self._patch = None  # last dot imprint (row slice, col slice)
        self.update(0)

    def update(self, t_us):
        if self._patch is not None:
            sy, sx = self._patch
            self.log_i[sy, sx] = self.log_base[sy, sx]
            self._patch = None
        dx, dy = self.scene.dot_center(t_us)
        r = self.scene.dot_radius + 1.5
        px0 = max(self.x0, int(math.floor(dx - r)))
        px1 = min(self.x1, int(math.ceil(dx + r)) + 1)
        py0 = max(self.y0, int(math.floor(dy - r)))
        py1 = min(self.y1, int(math.ceil(dy + r)) + 1)
        if px0 >= px1 or py0 >= py1:
            return
        sy = slice(py0 - self.y0, py1 - self.y0)
        sx = slice(px0 - self.x0, px1 - self.x0)
        gx, gy = np.meshgrid(
            np.arange(px0, px1, dtype=np.float64), np.arange(py0, py1, dtype=np.float64)
        )
        cov = np.clip(self.scene.dot_radius + 0.5 - np.hypot(gx - dx, gy - dy), 0.0, 1.0)
        base = self.base[sy, sx]
        self.log_i[sy, sx] = np.log(base + cov * (self.scene.dot_intensity - base) + self.eps)
        self._patch = (sy, sx)


class _LedSampler:
    """LED board: per-LED pixel index sets, scalar waveform per tick."""

    def __init__(self, scene, x0, x1, y0, y1, log_eps):
        self.scene = scene
        self.eps = log_eps
        gx, gy = np.meshgrid(
            np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64)
        )
        base = np.full(gx.shape, scene.ambient_intensity, dtype=np.float64)
        self.leds = []
        for led in scene.leds:
            cov = np.clip(
                led.radius + 0.5 - np.hypot(gx - led.center[0], gy - led.center[1]), 0.0, 1.0
            )
            idx = np.nonzero(cov)
            if len(idx[0]):
                self.leds.append((led, idx, cov[idx], base[idx]))
        self.log_i = np.log(base + log_eps)
        self.update(0)

    def update(self, t_us):
        from .scenes import waveform_value

        amb = self.scene.ambient_intensity
        amp = self.scene.amplitude
        for led, idx, cov, base in self.leds:
            w = float(waveform_value(led.waveform, led.frequency, t_us, led.duty))
            self.log_i[idx] = np.log(base + cov * (amb + amp * w - base) + self.eps)


def _make_sampler(scene, x0, x1, y0, y1, log_eps):
    from .scenes import LedBoardScene, SpinningDotScene

    if isinstance(scene, SpinningDotScene):
        return _DotSampler(scene, x0, x1, y0, y1, log_eps)
    if isinstance(scene, LedBoardScene):
        return _LedSampler(scene, x0, x1, y0, y1, log_eps)
    return _GenericSampler(scene, x0, x1, y0, y1, log_eps)


# ---------------------------------------------------------------------------
# Noise candidate streams


def _band_candidates(cfg: SimConfig, params: PixelParams, hot: np.ndarray, y0: int, y1: int, k_max: int):
    """Noise/leak arrivals for rows [y0, y1): (ticks, flat_pixel, polarity),
    sorted by tick, at most one candidate per (tick, pixel).

    Each polarity is thinned against its own threshold, so a low ON
    threshold shows up as an ON-heavy noise floor, the way a real pixel's
    comparator pair behaves.
    """
    w = cfg.width
    dur_s = cfg.duration_us / 1e6
    base_unit = 2.0 * cfg.noise_rate0
    # acceptance per candidate polarity: index OFF, ON
    accept = np.array(
        [
            math.exp(-params.theta_off / cfg.noise_theta),
            math.exp(-params.theta_on / cfg.noise_theta),
        ]
    )
    ticks_l, flat_l, pol_l = [], [], []
    for y in range(y0, y1):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_NOISE_KEY, y)))
        if base_unit > 0:
            mult = np.where(hot[y], cfg.hot_pixel_multiplier, 1.0)
            counts = rng.poisson(base_unit * mult * dur_s)
            total = int(counts.sum())
            if total:
                px = np.repeat(np.arange(w, dtype=np.int64), counts)
                tk = rng.integers(0, k_max + 1, size=total)
                pol = rng.integers(0, 2, size=total, dtype=np.int64)
                keep = rng.random(total) < accept[pol]
                ticks_l.append(tk[keep])
                flat_l.append(y * w + px[keep])
                pol_l.append(pol[keep])
        if cfg.leak_rate > 0:
            lcounts = rng.poisson(cfg.leak_rate * dur_s, size=w)
            ltot = int(lcounts.sum())
            if ltot:
                px = np.repeat(np.arange(w, dtype=np.int64), lcounts)
                tk = rng.integers(0, k_max + 1, size=ltot)
                ticks_l.append(tk)
                flat_l.append(y * w + px)
                pol_l.append(np.full(ltot, ON, dtype=np.int64))
    if not ticks_l:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z
    ticks = np.concatenate(ticks_l)
    flat = np.concatenate(flat_l)
    pol = np.concatenate(pol_l)
    # one candidate per (tick, pixel); the earliest draw wins deterministically
    key = ticks * np.int64(cfg.width * cfg.height) + flat
    _, first = np.unique(key, return_index=True)
    first.sort()
    ticks, flat, pol = ticks[first], flat[first], pol[first]
    order = np.argsort(ticks, kind="stable")
    return ticks[order], flat[order], pol[order]


# ---------------------------------------------------------------------------
# Core per-band simulation


def _simulate_band(scene, params: PixelParams, cfg: SimConfig, hot, y0: int, y1: int, k_max: int) -> np.ndarray:
    w = cfg.width
    if hasattr(scene, "dynamic_bbox"):
        bx0, by0, bx1, by1 = scene.dynamic_bbox()
    else:
        bx0, by0, bx1, by1 = 0, 0, cfg.width, cfg.height
    sy0, sy1 = max(by0, y0), min(by1, y1)
    has_signal = sy0 < sy1 and bx0 < bx1

    t_last = np.full((y1 - y0, w), float(_T_LAST_INIT))
    n_ticks, n_flat, n_pol = _band_candidates(cfg, params, hot, y0, y1, k_max)
    bounds = np.searchsorted(n_ticks, np.arange(k_max + 2))

    if has_signal:
        sampler = _make_sampler(scene, bx0, bx1, sy0, sy1, cfg.log_eps)
        v_pr = sampler.log_i.copy()
        identity_hp = params.f_hp == 0.0
        if identity_hp:
            beta = 0.0
            v_hp = v_pr
        else:
            tau_hp_us = 1e6 / (2.0 * math.pi * params.f_hp)
            beta = tau_hp_us / (tau_hp_us + cfg.tick_us)
            v_hp = np.zeros_like(v_pr)
        v_mem = v_hp.copy()
        tau_lp_us = 1e6 / (2.0 * math.pi * params.f_lp)
        alpha = cfg.tick_us / (tau_lp_us + cfg.tick_us)
        alpha_mem = (
            cfg.tick_us / (cfg.mem_tau_us + cfg.tick_us) if cfg.mem_tau_us and cfg.mem_tau_us > 0 else 0.0
        )
        mism_on, mism_off = threshold_mismatch(cfg, sy0, sy1)
        theta_on_px = params.theta_on * mism_on[:, bx0:bx1]
        theta_off_px = params.theta_off * mism_off[:, bx0:bx1]
        t_last_sig = t_last[sy0 - y0 : sy1 - y0, bx0:bx1]
        ys_grid, xs_grid = np.mgrid[sy0:sy1, bx0:bx1]
        ys_flat = ys_grid.ravel()
        xs_flat = xs_grid.ravel()

    t_refr = float(params.t_refr_us)
    out_t, out_x, out_y, out_p = [], [], [], []

    for k in range(0, k_max + 1):
        t = k * cfg.tick_us
        if k > 0 and has_signal:
            sampler.update(t)
            delta = alpha * (sampler.log_i - v_pr)
            v_pr += delta
            if identity_hp:
                v_hp = v_pr
            else:
                v_hp += delta
                v_hp *= beta
            if alpha_mem:
                gap = v_hp - v_mem  # drift can close gaps, never open them
                if cfg.mem_gap0 and cfg.mem_gap0 > 0:
                    fac = np.minimum(alpha_mem * (1.0 + (gap / cfg.mem_gap0) ** 2), 0.25)
                    v_mem += fac * gap
                else:
                    v_mem += alpha_mem * gap
            diff = v_hp - v_mem
            refr_ok = (t - t_last_sig) >= t_refr
            on = (diff >= theta_on_px) & refr_ok
            off = (diff <= -theta_off_px) & refr_ok
            fired = on | off
            if fired.any():
                ff = fired.ravel()
                v_mem[fired] = v_hp[fired]
                t_last_sig[fired] = t
                out_t.append(np.full(int(ff.sum()), t, dtype=np.int64))
                out_x.append(xs_flat[ff])
                out_y.append(ys_flat[ff])
                out_p.append(on.ravel()[ff].astype(np.int64))
        lo, hi = bounds[k], bounds[k + 1]
        if hi > lo:
            fl = n_flat[lo:hi]
            ry = fl // w - y0
            rx = fl % w
            tl = t_last[ry, rx]
            ok = ((t - tl) >= t_refr) & (tl != t)
            if ok.any():
                ry, rx = ry[ok], rx[ok]
                t_last[ry, rx] = t
                out_t.append(np.full(int(ok.sum()), t, dtype=np.int64))
                out_x.append(rx)
                out_y.append(ry + y0)
                out_p.append(n_pol[lo:hi][ok])

    if not out_t:
        return np.empty(0, dtype=EVENT_DTYPE)
    ev = np.empty(sum(len(a) for a in out_t), dtype=EVENT_DTYPE)
    ev["t"] = np.concatenate(out_t)
    ev["x"] = np.concatenate(out_x)
    ev["y"] = np.concatenate(out_y)
    ev["p"] = np.concatenate(out_p)
    return ev


def simulate(
    scene,
    biases: BiasSettings,
    cfg: SimConfig,
    scene_id: str = "",
    workers: int = 1,
) -> EventRecording:
    """Run the pixel model over a scene; fully deterministic given cfg.seed.

    ``workers`` only controls how many threads chew through the fixed row
    bands; it never changes the result.
    """
    if scene.width != cfg.width or scene.height != cfg.height:
        raise ValueError(
            f"scene is {scene.width}x{scene.height} but sensor is {cfg.width}x{cfg.height}"
        )
    params = bias_to_params(biases, cfg)
    hot = hot_pixel_mask(cfg)
    k_max = (cfg.duration_us - 1) // cfg.tick_us
    bands = [
        (y, min(y + cfg.band_rows, cfg.height)) for y in range(0, cfg.height, cfg.band_rows)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda b: _simulate_band(scene, params, cfg, hot, b[0], b[1], k_max), bands)
            )
    else:
        parts = [_simulate_band(scene, params, cfg, hot, y0, y1, k_max) for y0, y1 in bands]
    events = sort_events(np.concatenate(parts)) if parts else np.empty(0, dtype=EVENT_DTYPE)
    rec = EventRecording(
        width=cfg.width,
        height=cfg.height,
        duration_us=cfg.duration_us,
        biases=biases,
        scene_id=scene_id,
        seed=cfg.seed,
        events=events,
    )
    return rec.validate()


# ---------------------------------------------------------------------------
# Stream-quality estimate


def noise_fraction_estimate(rec: EventRecording, dt_us: int = 1000, radius: int = 1) -> float:
    """Fraction of events with no supporting neighbor.

    An event is supported when another event exists within Chebyshev distance
    ``radius`` and time distance ``dt_us`` (the classic background-activity
    filter rule); isolated events are counted as noise.
    """
    if dt_us <= 0:
        raise ValueError("dt_us must be positive")
    if radius < 1:
        raise ValueError("radius must be at least 1")
    ev = rec.events
    n = len(ev)
    if n == 0:
        return 0.0
    supported = np.zeros(n, dtype=bool)
    h, w = rec.height, rec.width
    for direction in (1, -1):
        last = np.full((h, w), -np.inf if direction == 1 else np.inf)
        order = range(n) if direction == 1 else range(n - 1, -1, -1)
        for i in order:
            t = float(ev["t"][i])
            x = int(ev["x"][i])
            y = int(ev["y"][i])
            y0, y1 = max(0, y - radius), min(h, y + radius + 1)
            x0, x1 = max(0, x - radius), min(w, x + radius + 1)
            block = last[y0:y1, x0:x1]
            if direction == 1:
                if block.max() >= t - dt_us:
                    supported[i] = True
            else:
                if block.min() <= t + dt_us:
                    supported[i] = True
            last[y, x] = t
    return float(1.0 - supported.mean())


def refractory_violations(rec: EventRecording, t_refr_us: float) -> int:
    """Count same-pixel event pairs closer than the refractory period."""
    ev = rec.events
    if len(ev) < 2:
        return 0
    flat = ev["y"].astype(np.int64) * rec.width + ev["x"]
    order = np.lexsort((ev["t"], flat))
    f = flat[order]
    t = ev["t"][order].astype(np.int64)
    same = f[1:] == f[:-1]
    gaps = t[1:] - t[:-1]
    return int(np.sum(same & (gaps < t_refr_us)))
