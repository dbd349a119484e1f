import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adlradar import sim


@pytest.fixture()
def small_params():
    """Short recording, keeps unit tests fast."""
    return sim.RadarParams(n_fast=256, n_slow=512)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def stationary_scenario(params, range_m=3.0, noise_sigma=0.0, rcs=1.0):
    track = sim.ScattererTrack(times=[0.0, params.duration],
                               ranges=[range_m, range_m], rcs=rcs)
    return sim.Scenario(params=params, tracks=[track], noise_sigma=noise_sigma)


def constant_velocity_scenario(params, r0, velocity, noise_sigma=0.0):
    """velocity > 0 moves toward the radar (range decreases)."""
    r1 = r0 - velocity * params.duration
    track = sim.ScattererTrack(times=[0.0, params.duration], ranges=[r0, r1])
    return sim.Scenario(params=params, tracks=[track], noise_sigma=noise_sigma)
