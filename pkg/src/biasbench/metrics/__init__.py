from .frequency import FrequencyFit, bin_polarity_signal, board_rfu_report, fit_frequency, rfu
from .tracking import (
    TrackerConfig,
    TrackingMetrics,
    Tracklet,
    dot_expected_path,
    dot_tracker_config,
    track_spatters,
    tracking_metrics,
)
from .trajectory import TrajectoryError, compute_ape, umeyama_alignment
from .heatmap import metric_heatmap, write_heatmap_csv, render_heatmap_png

__all__ = [
    "FrequencyFit",
    "bin_polarity_signal",
    "board_rfu_report",
    "fit_frequency",
    "rfu",
    "TrackerConfig",
    "TrackingMetrics",
    "Tracklet",
    "dot_expected_path",
    "dot_tracker_config",
    "track_spatters",
    "tracking_metrics",
    "TrajectoryError",
    "compute_ape",
    "umeyama_alignment",
    "metric_heatmap",
    "write_heatmap_csv",
    "render_heatmap_png",
]
