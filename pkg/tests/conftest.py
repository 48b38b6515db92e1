import pytest

from biasbench.core import BiasSettings, EventRecording, events_array, sort_events
from biasbench.scenes import SpinningDotScene
from biasbench.sim import SimConfig


@pytest.fixture
def small_cfg():
    return SimConfig(width=48, height=48, duration_us=200_000, seed=123, hpf_zero_level=0)


@pytest.fixture
def small_dot_scene():
    return SpinningDotScene.preset(48, 48)


@pytest.fixture
def sample_recording():
    events = sort_events(
        events_array(
            [
                (10, 3, 4, 1),
                (10, 3, 5, 0),
                (250, 0, 0, 1),
                (999, 31, 31, 0),
                (1500, 3, 4, 1),
            ]
        )
    )
    return EventRecording(
        width=32,
        height=32,
        duration_us=10_000,
        biases=BiasSettings(1, -2, 3, -4, 5),
        scene_id="test",
        seed=99,
        events=events,
    ).validate()


def make_recording(events, width=32, height=32, duration_us=10_000, **kw):
    return EventRecording(
        width=width,
        height=height,
        duration_us=duration_us,
        biases=kw.pop("biases", BiasSettings()),
        scene_id=kw.pop("scene_id", "test"),
        seed=kw.pop("seed", 0),
        events=sort_events(events_array(events)),
    ).validate()
