import datetime as dt

import numpy as np
import pytest

from overflight import trigger


@pytest.fixture
def location0_cfg():
    """The 3 km trigger radius site used throughout the fixtures."""
    return trigger.TriggerConfig(
        location_id=0, mic_id=1, device_position=(-34.95, 138.53),
        trigger_distance_km=3.0, silence_radius_km=10.0,
        confirmations_required=3, snapshot_period_s=10.0, cooldown_s=5.0)


@pytest.fixture
def base_time():
    return dt.datetime(2023, 5, 9, 12, 0, 0)


def make_clip(duration_s, seed=0, amplitude=0.2):
    from overflight.capture import AudioClip, SAMPLE_RATE
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    samples = (amplitude * rng.standard_normal(n) * 32767).clip(-32768, 32767)
    return AudioClip(samples=samples.astype(np.int16))
