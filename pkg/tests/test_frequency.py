import math

import numpy as np
import pytest

from biasbench.metrics.frequency import (
    RFU_CAP,
    FrequencyFit,
    bin_polarity_signal,
    fit_frequency,
    fit_series,
    rfu,
)

from conftest import make_recording


def cosine_series(f0, n=1000, bin_us=1000, amp=1.0, offset=0.0, phase=0.0):
    t = (np.arange(n) + 0.5) * bin_us / 1e6
    return amp * np.cos(2 * np.pi * f0 * t + phase) + offset


class TestFitSeries:
    def test_noiseless_50hz_recovered_to_microhertz(self):
        fit = fit_series(cosine_series(50.0), 1000)
        assert not fit.degenerate
        assert abs(fit.f_est - 50.0) < 1e-6
        assert fit.delta_f_est < 1e-6
        assert fit.amplitude == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("f0", [1.0, 3.7, 20.0, 77.3, 141.0, 200.0])
    def test_noiseless_sweep_recovers_below_point1_percent(self, f0):
        fit = fit_series(cosine_series(f0, n=2000), 1000)
        assert abs(fit.f_est - f0) / f0 < 1e-3

    def test_all_zero_signal_degenerate(self):
        fit = fit_series(np.zeros(1000), 1000)
        assert fit.degenerate
        assert rfu(fit, 10.0) == RFU_CAP

    def test_constant_signal_degenerate(self):
        fit = fit_series(np.full(1000, 3.0), 1000)
        assert fit.degenerate

    def test_noisy_20hz_error_bound_95th_percentile(self):
        # 10% amplitude uniform noise; the 95th percentile of
        # |f_est - 20| + delta over 100 seeds stays below 0.5 Hz
        scores = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            s = cosine_series(20.0) + rng.uniform(-0.1, 0.1, size=1000)
            fit = fit_series(s, 1000)
            scores.append(abs(fit.f_est - 20.0) + fit.delta_f_est)
        assert np.percentile(scores, 95) < 0.5

    def test_offset_and_phase_recovered(self):
        fit = fit_series(cosine_series(12.0, amp=2.5, offset=0.7, phase=1.1), 1000)
        assert fit.amplitude == pytest.approx(2.5, abs=1e-6)
        assert fit.offset == pytest.approx(0.7, abs=1e-6)


class TestRfu:
    def test_perfect_estimate_zero(self):
        fit = FrequencyFit(10.0, 0.0, 1.0, 0.0, 0.0)
        assert rfu(fit, 10.0) == 0.0

    def test_eq1_arithmetic(self):
        fit = FrequencyFit(11.0, 1.0, 1.0, 0.0, 0.0)
        assert rfu(fit, 10.0) == pytest.approx(0.2)

    def test_cap_at_two(self):
        fit = FrequencyFit(100.0, 50.0, 1.0, 0.0, 0.0)
        assert rfu(fit, 10.0) == 2.0

    def test_infinite_error_caps(self):
        fit = FrequencyFit(10.0, math.inf, 1.0, 0.0, 0.0)
        assert rfu(fit, 10.0) == 2.0

    def test_nonpositive_truth_rejected(self):
        fit = FrequencyFit(10.0, 0.0, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            rfu(fit, 0.0)

    def test_with_truth_attaches(self):
        fit = FrequencyFit(11.0, 1.0, 1.0, 0.0, 0.0).with_truth(10.0)
        assert fit.f0 == 10.0
        assert fit.rfu == pytest.approx(0.2)

    def test_rfu_always_in_range(self):
        for f_est in (0.1, 5.0, 9.9, 10.0, 30.0, 1e6):
            for delta in (0.0, 0.5, 1e9):
                v = rfu(FrequencyFit(f_est, delta, 1.0, 0.0, 0.0), 10.0)
                assert 0.0 <= v <= 2.0


class TestEventPath:
    def _cosine_recording(self, f0=50.0, amp=20, duration_us=1_000_000):
        # per 1 ms bin: |round(amp*cos)| events at distinct pixels, polarity
        # by sign, so the binned ON-OFF series is the quantized cosine
        events = []
        for k in range(duration_us // 1000):
            t = (k + 0.5) * 1e-3
            v = round(amp * math.cos(2 * math.pi * f0 * t))
            pol = 1 if v >= 0 else 0
            for i in range(abs(v)):
                events.append((k * 1000 + i, i % 32, i // 32, pol))
        return make_recording(events, width=32, height=32, duration_us=duration_us)

    def test_binned_signal_matches_construction(self):
        rec = self._cosine_recording()
        s = bin_polarity_signal(rec, None, 1000)
        t = (np.arange(1000) + 0.5) * 1e-3
        expected = np.round(20 * np.cos(2 * np.pi * 50.0 * t))
        assert np.array_equal(s, expected)

    def test_fit_frequency_from_events(self):
        fit = fit_frequency(self._cosine_recording(), bin_us=1000)
        assert abs(fit.f_est - 50.0) < 0.05
        assert rfu(fit, 50.0) < 0.01

    def test_roi_filters_events(self):
        rec = make_recording([(500 + i, 2, 2, 1) for i in range(20)], width=32, height=32)
        s_in = bin_polarity_signal(rec, (0, 0, 4, 4), 1000)
        s_out = bin_polarity_signal(rec, (10, 10, 20, 20), 1000)
        assert s_in.sum() == 20
        assert s_out.sum() == 0

    def test_empty_recording_degenerate(self):
        rec = make_recording([], duration_us=1_000_000)
        fit = fit_frequency(rec)
        assert fit.degenerate

    def test_board_report_on_empty_recording_invalid(self):
        from biasbench.metrics.frequency import board_rfu_report
        from biasbench.scenes import LedBoardScene

        scene = LedBoardScene.preset(64, 64)
        rec = make_recording([], width=64, height=64, duration_us=4_000_000)
        fits, valid = board_rfu_report(rec, scene)
        assert not valid
        assert all(f.rfu == 2.0 for f in fits)
