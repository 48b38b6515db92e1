"""Bias-tuning workbench for event cameras.

Simulated recording corpora over bias grids, stream-quality metrics, and
online tuners (a fixed-step feedback controller and a behavior-cloned
policy) over a recording-swap environment.
"""

from .core import (
    AccumulatedFrame,
    BiasSettings,
    Event,
    EventRecording,
    FormatError,
    InvariantError,
    accumulate,
    event_rate,
)
from .fileio import (
    DatasetManifest,
    ManifestEntry,
    load_manifest,
    read_recording,
    save_manifest,
    write_recording,
)
from .sim import PixelParams, SimConfig, bias_to_params, noise_fraction_estimate, simulate
from .scenes import LedBoardScene, SpinningDotScene, make_scene
from .grid import (
    BiasGrid,
    build_grid,
    desk_threshold_grid,
    led_board_grid,
    record_grid,
    snap_to_grid,
    spinning_dot_grid,
    validity_summary,
    vo_arm_grid,
)
from .env import BiasAction, MdpEnv

__version__ = "0.1.0"
