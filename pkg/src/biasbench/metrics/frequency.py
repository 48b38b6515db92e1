"""Blink-frequency estimation from polarity-difference time series.

The per-bin difference between ON and OFF counts inside a region oscillates
at the drive frequency of a blinking light source.  A cosine is fitted by
Levenberg-Marquardt, seeded from the periodogram peak; the figure of merit
is the relative frequency uncertainty

    rfu = min(2, (|f_est - f0| + delta_f_est) / f0)

where delta_f_est is the one-sigma standard error of the fitted frequency.
0 means a perfect estimate; the cap at 2 stops single hopeless fits from
dominating aggregate scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..core import EventRecording, ON

RFU_CAP = 2.0


@dataclass(frozen=True)
class FrequencyFit:
    f_est: float  # Hz
    delta_f_est: float  # 1-sigma standard error, Hz
    amplitude: float
    phase: float
    offset: float
    degenerate: bool = False
    f0: Optional[float] = None  # ground truth, attached by callers
    rfu: Optional[float] = None

    def with_truth(self, f0: float) -> "FrequencyFit":
        return replace(self, f0=f0, rfu=rfu(self, f0))


def rfu(fit: FrequencyFit, f0: float) -> float:
    """Relative frequency uncertainty, clipped to [0, 2]."""
    if f0 <= 0:
        raise ValueError("ground-truth frequency must be positive")
    if fit.degenerate or not math.isfinite(fit.delta_f_est):
        return RFU_CAP
    return min(RFU_CAP, (abs(fit.f_est - f0) + fit.delta_f_est) / f0)


def bin_polarity_signal(
    rec: EventRecording, roi: tuple[int, int, int, int] | None, bin_us: int
) -> np.ndarray:
    """Per-bin (ON - OFF) counts inside a half-open roi box."""
    if bin_us <= 0:
        raise ValueError("bin_us must be positive")
    n_bins = rec.duration_us // bin_us
    if n_bins < 2:
        raise ValueError("recording shorter than two bins")
    ev = rec.events
    if roi is not None:
        x0, y0, x1, y1 = roi
        m = (ev["x"] >= x0) & (ev["x"] < x1) & (ev["y"] >= y0) & (ev["y"] < y1)
        ev = ev[m]
    s = np.zeros(n_bins, dtype=np.float64)
    if len(ev):
        bins = (ev["t"] // bin_us).astype(np.int64)
        keep = bins < n_bins
        bins = bins[keep]
        sign = np.where(ev["p"][keep] == ON, 1.0, -1.0)
        np.add.at(s, bins, sign)
    return s


def _periodogram_peak(s: np.ndarray, bin_s: float) -> float:
    """Initial frequency: FFT power peak refined by parabolic interpolation."""
    n = len(s)
    power = np.abs(np.fft.rfft(s - s.mean())) ** 2
    if len(power) < 3:
        return 1.0 / (n * bin_s)
    k = int(np.argmax(power[1:])) + 1  # skip DC
    df = 1.0 / (n * bin_s)
    if 1 <= k < len(power) - 1:
        pm, p0, pp = power[k - 1], power[k], power[k + 1]
        denom = pm - 2.0 * p0 + pp
        if denom != 0:
            delta = 0.5 * (pm - pp) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
            return (k + delta) * df
    return k * df


def _seed_linear(t: np.ndarray, s: np.ndarray, f: float) -> tuple[float, float, float]:
    """Amplitude/phase/offset at fixed frequency by linear least squares."""
    w = 2.0 * np.pi * f
    basis = np.column_stack([np.cos(w * t), np.sin(w * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, s, rcond=None)
    a, b, c = coef
    amp = math.hypot(a, b)
    phase = math.atan2(-b, a)  # A cos(wt + phi) = a cos(wt) + b sin(wt)
    return amp, phase, c


def _model_and_jacobian(p: np.ndarray, t: np.ndarray):
    amp, f, phase, c = p
    arg = 2.0 * np.pi * f * t + phase
    cos_a = np.cos(arg)
    sin_a = np.sin(arg)
    model = amp * cos_a + c
    jac = np.column_stack([
        cos_a,
        -amp * 2.0 * np.pi * t * sin_a,
        -amp * sin_a,
        np.ones_like(t),
    ])
    return model, jac


def _lm_fit(t: np.ndarray, s: np.ndarray, p0: np.ndarray, max_iter: int = 200, rtol: float = 1e-10):
    """Levenberg-Marquardt on A*cos(2 pi f t + phi) + c.

    Stops when the relative residual-norm change drops below rtol or after
    max_iter damping-accepted steps.  Returns (params, cov) with cov the
    residual-variance-scaled inverse Gauss-Newton normal matrix.
    """
    p = p0.astype(np.float64).copy()
    model, jac = _model_and_jacobian(p, t)
    r = model - s
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        jtj = jac.T @ jac
        g = jac.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)) + 1e-15 * np.eye(4), -g)
        except np.linalg.LinAlgError:
            break
        p_new = p + step
        model_new, jac_new = _model_and_jacobian(p_new, t)
        r_new = model_new - s
        cost_new = float(r_new @ r_new)
        if cost_new < cost:
            rel = abs(cost - cost_new) / max(cost, 1e-300)
            p, r, jac, cost = p_new, r_new, jac_new, cost_new
            lam = max(lam * 0.3, 1e-12)
            if rel < rtol:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    n, k = len(t), 4
    dof = max(n - k, 1)
    sigma2 = cost / dof
    jtj = jac.T @ jac
    try:
        cov = sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.inf)
    return p, cov


def fit_series(s: np.ndarray, bin_us: int) -> FrequencyFit:
    """Fit a cosine to one already-binned polarity-difference series."""
    s = np.asarray(s, dtype=np.float64)
    if len(s) == 0 or not np.any(s != 0) or np.ptp(s) == 0:
        return FrequencyFit(0.0, math.inf, 0.0, 0.0, float(s.mean() if len(s) else 0.0), degenerate=True)
    bin_s = bin_us / 1e6
    t = (np.arange(len(s)) + 0.5) * bin_s
    f_init = _periodogram_peak(s, bin_s)
    if f_init <= 0:
        return FrequencyFit(0.0, math.inf, 0.0, 0.0, float(s.mean()), degenerate=True)
    amp, phase, c = _seed_linear(t, s, f_init)
    p, cov = _lm_fit(t, s, np.array([amp, f_init, phase, c]))
    delta_f = float(math.sqrt(cov[1, 1])) if np.isfinite(cov[1, 1]) and cov[1, 1] >= 0 else math.inf
    f_est = float(abs(p[1]))
    if not math.isfinite(f_est) or f_est <= 0:
        return FrequencyFit(0.0, math.inf, 0.0, 0.0, float(s.mean()), degenerate=True)
    return FrequencyFit(
        f_est=f_est,
        delta_f_est=delta_f,
        amplitude=float(abs(p[0])),
        phase=float(p[2]),
        offset=float(p[3]),
    )


def fit_frequency(
    rec: EventRecording,
    roi: tuple[int, int, int, int] | None = None,
    bin_us: int = 1000,
) -> FrequencyFit:
    """Estimate the dominant oscillation frequency of a region's events.

    Degenerate inputs (no events, constant signal) return a flagged fit
    with infinite frequency error so downstream rfu clips to the cap.
    """
    return fit_series(bin_polarity_signal(rec, roi, bin_us), bin_us)


def board_rfu_report(rec: EventRecording, scene) -> tuple[list[FrequencyFit], bool]:
    """Per-LED frequency fits against the board's known drive frequencies.

    The bin width adapts per LED so fast square LEDs stay below Nyquist.
    A recording shorter than two periods of an LED cannot constrain its
    frequency and is scored as degenerate for that LED.  The board is valid
    when every rfu is below the cap.
    """
    fits: list[FrequencyFit] = []
    for i, led in enumerate(scene.leds):
        f0 = led.frequency
        roi = scene.led_roi(i)
        bin_us = int(min(1000, max(50, 1e6 / (8.0 * f0))))
        if rec.duration_us < 2.0 * 1e6 / f0:
            fit = FrequencyFit(0.0, math.inf, 0.0, 0.0, 0.0, degenerate=True)
        else:
            fit = fit_frequency(rec, roi, bin_us)
        fits.append(fit.with_truth(f0))
    valid = all(f.rfu is not None and f.rfu < RFU_CAP for f in fits)
    return fits, valid
